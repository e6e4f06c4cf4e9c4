#include <iostream>

#include "routegate/cli.hpp"

int main(int argc, char** argv) { return routegate::cli::run(argc, argv, std::cout, std::cerr); }
