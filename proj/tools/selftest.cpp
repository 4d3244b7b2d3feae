#include <ostream>

#include "cli.hpp"
#include "properties.hpp"

namespace marpo::cli {

bool run_selftest(const SelftestOptions& options, std::ostream& out) {
  const props::PropertyResult results[] = {
      props::estimator_unbiasedness(),
      props::estimator_shape(),
      props::root_solving(),
      props::ema_controller(),
      props::gradient_checks(20, 15, options.inject_gradient_fault),
      props::mappo_reduction(),
      props::gae_oracle(),
  };
  bool all = true;
  double total = 0.0;
  for (const auto& r : results) {
    out << props::format_line(r) << '\n';
    all = all && r.passed;
    total += r.seconds;
  }
  out << (all ? "selftest passed" : "selftest FAILED") << " in " << total << " s\n";
  return all;
}

}  // namespace marpo::cli
