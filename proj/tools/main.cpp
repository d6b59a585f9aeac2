#include <iostream>

#include "ctxnmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ctxnmt::run_cli(args, std::cout, std::cerr);
}
