#include <torch/torch.h>

#include "lbgan/cli.hpp"

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  return lbgan::cli::run(argc, argv);
}
