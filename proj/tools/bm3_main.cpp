#include <iostream>

#include "bm3/cli.hpp"

int main(int argc, char** argv) { return bm3::run_cli(argc, argv, std::cout, std::cerr); }
