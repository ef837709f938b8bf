#include <iostream>

#include "hopac/cli.hpp"

int main(int argc, char** argv) { return hopac::cli::run(argc, argv, std::cout, std::cerr); }
