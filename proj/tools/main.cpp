#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return relslope::run_cli(argc, argv, std::cout, std::cerr); }
