#include <string>
#include <vector>

#include "deepbf/cli.hpp"

int main(int argc, char** argv) {
    return deepbf::cli::run_command(std::vector<std::string>(argv, argv + argc));
}
