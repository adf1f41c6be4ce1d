#include <iostream>

#include "ubiq/cli.hpp"

int main(int argc, char** argv) { return ubiq::cli::run(argc, argv, std::cout, std::cerr); }
