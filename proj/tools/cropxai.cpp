#include <iostream>

#include "cropxai/cli.hpp"

int main(int argc, char** argv) { return cropxai::run_cli(argc, argv, std::cout, std::cerr); }
