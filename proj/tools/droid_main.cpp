#include <string>
#include <vector>

#include "droid/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return droid::cli::run_subcommand(args);
}
