#include <iostream>

#include "cfarnet/app/cli.hpp"

int main(int argc, char** argv) { return cfarnet::app::run_cli(argc, argv, std::cout, std::cerr); }
