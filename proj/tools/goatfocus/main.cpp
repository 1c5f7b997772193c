#include <iostream>
#include <string>
#include <vector>

#include "goat/cli.hpp"

int main(int argc, char** argv) {
  return goat::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
