#include <iostream>

#include "formula/cli.hpp"

int main(int argc, char** argv) { return formula::cli::run(argc, argv, std::cout, std::cerr); }
