#pragma once
// Command-line entry point. Returns the process exit code:
// 0 success, 1 failure, 2 usage error.

namespace isa::cli {

int run(int argc, const char* const* argv);

} // namespace isa::cli
