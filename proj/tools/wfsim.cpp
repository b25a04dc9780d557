#include "wfsim/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return wfsim::cli::run(argc, argv, std::cout, std::cerr); }
