#include "pdmp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return pdmp::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
