#include <iostream>

#include "proxopt_cli.hpp"

int main(int argc, char** argv) {
  return proxopt::cli::run(argc, argv, std::cout, std::cerr);
}
