#include "gradflow/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gradflow::run_cli(argc, argv, std::cout, std::cerr); }
