#include <iostream>
#include <string>
#include <vector>

#include "gplcp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gplcp::run_cli(args, std::cout, std::cerr);
}
