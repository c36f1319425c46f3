#include <iostream>

#include "adec/cli/cli.hpp"

int main(int argc, char** argv) { return adec::cli::run_cli(argc, argv, std::cout, std::cerr); }
