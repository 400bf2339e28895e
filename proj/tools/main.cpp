#include <iostream>
#include <string>
#include <vector>

#include "ompadvisor/cli.hpp"

int main(int argc, char** argv) {
    return ompadvisor::execute_command(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
