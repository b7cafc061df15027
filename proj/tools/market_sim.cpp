#include <iostream>
#include <string>
#include <vector>

#include "mktsim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mktsim::cli::run_cli(args, std::cout, std::cerr);
}
