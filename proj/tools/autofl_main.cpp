#include <iostream>

#include "autofl/cli.hpp"

int main(int argc, char** argv) { return autofl::run_cli(argc, argv, std::cout, std::cerr); }
