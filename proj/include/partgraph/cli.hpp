#pragma once

namespace partgraph {

// Entry point for the command-line tool; returns the process exit code
// (0 success, 1 usage error, 2 runtime error). Exposed as a library call so
// tests can drive subcommands in-process.
int run_cli(int argc, const char* const* argv);

} // namespace partgraph
