#pragma once

#include <string>
#include <vector>

namespace metaood::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kDataError = 2,
    kNumericError = 3,
};

/// Full command line, program name first. Parses, dispatches to a verb and maps
/// failures to the exit-code taxonomy.
int run(const std::vector<std::string>& args);

/// Revision baked in at configure time ("unknown" outside a git checkout).
const char* git_revision();

}  // namespace metaood::cli
