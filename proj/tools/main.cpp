// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "cystseg/cli.hpp"

int main(int argc, char** argv) { return cystseg::run_cli(argc, argv, std::cout, std::cerr); }
