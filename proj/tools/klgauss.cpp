#include "klgauss/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return klgauss::run_cli(argc, argv, std::cout, std::cerr); }
