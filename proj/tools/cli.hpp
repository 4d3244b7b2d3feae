#ifndef MARPO_TOOLS_CLI_HPP_
#define MARPO_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace marpo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the `marpo` binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SelftestOptions {
  /// Test hook: corrupts the analytic gradient so the gradient property fails.
  bool inject_gradient_fault = false;
};

/// Runs the property suite, printing one PASS/FAIL line per property.
/// Returns true when every property holds.
bool run_selftest(const SelftestOptions& options, std::ostream& out);

struct BoundsRow {
  double target;
  double lower;
  double upper;
};

/// Static line chart of both clipping bounds against the KL target.
void write_bounds_svg(std::ostream& out, const std::vector<BoundsRow>& rows);

}  // namespace marpo::cli

#endif  // MARPO_TOOLS_CLI_HPP_
