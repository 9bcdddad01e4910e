#include <iostream>
#include <string>
#include <vector>

#include "dispersal/cli_io.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return dispersal::cli::main_entry(args, std::cout, std::cerr);
}
