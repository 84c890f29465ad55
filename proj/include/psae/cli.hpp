#pragma once

#include <string>
#include <vector>

namespace psae {

// Entry point behind the psae binary. `args` is argv without the program
// name. Returns 0 on success, 1 on usage errors (bad flags, missing
// subcommand), 2 on runtime failures (bad config, missing files, ...).
int run(const std::vector<std::string>& args);

}  // namespace psae
