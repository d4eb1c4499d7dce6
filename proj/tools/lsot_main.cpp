#include <iostream>

#include "lsot/commands.hpp"

int main(int argc, char** argv) { return lsot::run_cli(argc, argv, std::cout, std::cerr); }
