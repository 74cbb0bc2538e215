#include <iostream>

#include "pirnn/cli.hpp"

int main(int argc, char** argv) { return pirnn::cli::run(argc, argv, std::cout, std::cerr); }
