#pragma once

#include <ostream>

namespace relslope {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

inline constexpr const char* kVersion = "relslope 1.0.0";
/// Directory for cached pivotal draws; unset means no caching.
inline constexpr const char* kCacheEnv = "RELSLOPE_CACHE_DIR";

/// Entry point shared by the executable and the tests. Reports go to `out`,
/// diagnostics to `err`; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relslope
