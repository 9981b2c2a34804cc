#pragma once

#include <string>
#include <string_view>

#include <torch/torch.h>

namespace lbgan {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 over every parameter and buffer of a module (names, shapes and raw
/// contiguous bytes, in registration order).
std::string parameter_digest(const torch::nn::Module& module);

/// SHA-256 of a file's contents; throws IoError if it cannot be read.
std::string file_sha256(const std::string& path);

}  // namespace lbgan
