#include <iostream>
#include <string>
#include <vector>

#include "qmln/report.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qmln::run_command(args, std::cout, std::cerr);
}
