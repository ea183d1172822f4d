#pragma once

#include <ostream>

namespace nsde {

inline constexpr const char* kVersion = "nsde 1.0.0";

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kConfig = 2;
inline constexpr int kNumeric = 3;
inline constexpr int kNotConverged = 4;
}  // namespace exit_code

/// Entry point of the `nsde` command line tool. JSON goes to `out` unless
/// --out is given; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsde
