#include <iostream>

#include "pvdyn/cli.hpp"

int main(int argc, char** argv) { return pvdyn::cli::run(argc, argv, std::cout, std::cerr); }
