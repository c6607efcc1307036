#include <iostream>
#include <string>
#include <vector>

#include "nucleikit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nucleikit::cli::run(args, std::cout, std::cerr);
}
