#pragma once

#include <string>
#include <vector>

namespace ecal {

/// Runs one CLI invocation. args excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on runtime failures.
int dispatch(std::vector<std::string> args);

}  // namespace ecal
