#include "eitmag/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return eitmag::cli::run_cli(argc, argv, std::cout, std::cerr); }
