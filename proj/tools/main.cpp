#include <vector>

#include "zoomrl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return zoomrl::run_cli(std::move(args));
}
