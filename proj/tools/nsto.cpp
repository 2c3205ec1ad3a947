#include <iostream>
#include <string>
#include <vector>

#include "nsto/io/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return nsto::io::run_cli(args, std::cout, std::cerr);
}
