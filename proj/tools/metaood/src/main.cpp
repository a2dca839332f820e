#include "metaood_cli/commands.hpp"

int main(int argc, char** argv) {
    return metaood::cli::run(std::vector<std::string>(argv, argv + argc));
}
