#include <iostream>

#include "qmnewt/cli.hpp"

int main(int argc, char** argv) { return qmnewt::cli_main(argc, argv, std::cout, std::cerr); }
