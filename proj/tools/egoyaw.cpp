#include <iostream>

#include "egoyaw/cli.hpp"

int main(int argc, char** argv) { return egoyaw::run_cli(argc, argv, std::cout, std::cerr); }
