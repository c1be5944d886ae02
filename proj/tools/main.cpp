#include <iostream>

#include "ntm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ntm::cli::run(args, std::cout, std::cerr);
}
