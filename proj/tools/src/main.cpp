#include <iostream>

#include "aglab/cli.hpp"

int main(int argc, char** argv)
{
    return aglab::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
