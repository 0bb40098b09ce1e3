#pragma once

namespace eigendrift::cli {

// Full CLI entry point; returns the process exit code
// (0 success, 2 config error, 3 numeric failure).
int run(int argc, const char* const* argv);

}  // namespace eigendrift::cli
