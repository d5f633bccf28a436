#include <iostream>
#include <string>
#include <vector>

#include "otn/app.hpp"

int main(int argc, char** argv) {
  return otn::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
