#pragma once

namespace larp {

// Entry point of the `larp` tool. Returns the process exit code:
// 0 success, 2 configuration error, 3 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace larp
