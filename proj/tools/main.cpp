#include <iostream>

#include "thermid/cli.hpp"

int main(int argc, char** argv) { return thermid::cli::run(argc, argv, std::cout, std::cerr); }
