#include "regionedit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return regionedit::cli_dispatch(args);
}
