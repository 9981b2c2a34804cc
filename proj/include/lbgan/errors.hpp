#pragma once

#include <stdexcept>
#include <string>

namespace lbgan {

// Base of every error thrown by the library. The CLI maps UsageError,
// ConfigError and InvalidRequest to exit code 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LBGAN_DEFINE_ERROR(Name)        \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

LBGAN_DEFINE_ERROR(InvalidPose);
LBGAN_DEFINE_ERROR(InvalidIndex);
LBGAN_DEFINE_ERROR(InvalidParameter);
LBGAN_DEFINE_ERROR(InvalidInput);
LBGAN_DEFINE_ERROR(AlignmentError);
LBGAN_DEFINE_ERROR(IoError);
LBGAN_DEFINE_ERROR(SamplingError);
LBGAN_DEFINE_ERROR(ConfigError);
LBGAN_DEFINE_ERROR(CheckpointError);
LBGAN_DEFINE_ERROR(TrainingError);
LBGAN_DEFINE_ERROR(StateError);
LBGAN_DEFINE_ERROR(InvalidRequest);
LBGAN_DEFINE_ERROR(ProtocolError);
LBGAN_DEFINE_ERROR(UsageError);

#undef LBGAN_DEFINE_ERROR

}  // namespace lbgan
