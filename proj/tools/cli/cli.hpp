#pragma once

#include <iosfwd>

namespace scalecamo::cli {

/// Exit codes: 0 success, 1 usage / configuration / I/O error, 2 domain failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDomain = 2;

/// Entry point of the `scalecamo` binary. Human summaries go to `out`,
/// diagnostics to `err`; machine-readable artifacts go under the output dir.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scalecamo::cli
