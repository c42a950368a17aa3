#include <iostream>

#include <qweb/cli.hpp>

int main(int argc, char** argv) { return qweb::cli::run_cli(argc, argv, std::cout, std::cerr); }
