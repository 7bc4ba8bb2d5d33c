#include <iostream>
#include <string>
#include <vector>

#include "lcot/app/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lcot::app::run_cli(args, std::cin, std::cout, std::cerr);
}
