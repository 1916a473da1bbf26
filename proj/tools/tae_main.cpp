#include <string>
#include <vector>

#include "tae/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tae::cli::run(args);
}
