// Command-line entry point: convert, linearize, train, parse, eval, bench.
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace arbor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs one command line; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace arbor::cli
