#include <iostream>

#include "sawar/cli.hpp"

int main(int argc, char** argv) { return sawar::run_cli(argc, argv, std::cout, std::cerr); }
