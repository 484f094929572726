#include "tatonnement/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tat::run_cli(argc, argv, std::cout, std::cerr); }
