#include <iostream>

#include "wspice/cli.hpp"

int main(int argc, char** argv) { return wspice::run_cli(argc, argv, std::cout, std::cerr); }
