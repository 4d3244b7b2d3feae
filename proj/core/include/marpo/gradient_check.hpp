#ifndef MARPO_GRADIENT_CHECK_HPP_
#define MARPO_GRADIENT_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace marpo {

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Denominator floor: error_i = |numeric_i - analytic_i| / max(floor, |analytic_i|).
  double denominator_floor = 1e-8;
};

struct GradientCheckReport {
  std::vector<double> numeric;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t failures = 0;
  bool passed() const { return failures == 0; }
};

/// Loss evaluated in extended precision so central differences at h = 1e-5
/// are not swamped by double rounding.
using ExtendedLoss = std::function<long double(std::span<const long double>)>;

/// Compares `analytic` against central finite differences of `loss` around
/// `point`, coordinate by coordinate.
GradientCheckReport check_gradient(const ExtendedLoss& loss, std::span<const double> point,
                                   std::span<const double> analytic,
                                   const GradientCheckOptions& options = {});

}  // namespace marpo

#endif  // MARPO_GRADIENT_CHECK_HPP_
