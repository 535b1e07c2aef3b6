#include <iostream>

#include "nsq/cli.hpp"

int main(int argc, char** argv) { return nsq::run_cli(argc, argv, std::cout, std::cerr); }
