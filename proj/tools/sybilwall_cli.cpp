#include <iostream>

#include "sybilwall/cli.hpp"

int main(int argc, char** argv) { return sybilwall::run_cli(argc, argv, std::cout, std::cerr); }
