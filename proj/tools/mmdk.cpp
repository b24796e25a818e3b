#include <iostream>

#include "mmdk/cli.hpp"

int main(int argc, char** argv) { return mmdk::cli::main(argc, argv, std::cout, std::cerr); }
