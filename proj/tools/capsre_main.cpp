#include <iostream>
#include <string>
#include <vector>

#include "capsre/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return capsre::run_cli(args, std::cout, std::cerr);
}
