#include <iostream>

#include "ppt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ppt::run_cli(args, std::cout, std::cerr);
}
