#include <cstdlib>
#include <iostream>

#include "agla/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> env_seed;
  if (const char* s = std::getenv("AGLA_SEED")) env_seed = s;
  return agla::cli::run(args, env_seed, std::cout, std::cerr);
}
