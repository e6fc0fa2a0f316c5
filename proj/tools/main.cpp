#include <iostream>

#include "srlgnn/cli.hpp"

int main(int argc, char** argv) { return srlgnn::cli::run(argc, argv, std::cout, std::cerr); }
