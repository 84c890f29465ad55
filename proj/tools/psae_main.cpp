#include <string>
#include <vector>

#include "psae/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return psae::run(args);
}
