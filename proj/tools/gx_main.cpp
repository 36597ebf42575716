#include <iostream>
#include <string>
#include <vector>

#include "gx/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gx::run(args, std::cout, std::cerr);
}
