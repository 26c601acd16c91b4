#include <iostream>

#include "heatlab/harness.hpp"

int main(int argc, char** argv) { return heatlab::cli_main(argc, argv, std::cout, std::cerr); }
