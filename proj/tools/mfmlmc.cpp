#include "mfmlmc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return mfmlmc::run_cli(argc, argv, std::cout, std::cerr);
}
