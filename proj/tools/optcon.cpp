#include <iostream>

#include "optcon/cli.hpp"

int main(int argc, char** argv) { return optcon::cli::run(argc, argv, std::cout, std::cerr); }
