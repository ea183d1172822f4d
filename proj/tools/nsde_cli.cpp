#include <iostream>

#include "nsde/cli.hpp"

int main(int argc, char** argv) { return nsde::run_cli(argc, argv, std::cout, std::cerr); }
