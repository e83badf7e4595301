#include "dsaga/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return dsaga::run_cli(argc, argv, std::cout, std::cerr);
}
