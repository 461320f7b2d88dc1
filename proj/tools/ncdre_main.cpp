#include "ncdre/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ncdre::run_cli(argc, argv, std::cout, std::cerr); }
