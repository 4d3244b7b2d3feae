#include "marpo/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "marpo/errors.hpp"

namespace marpo {

GradientCheckReport check_gradient(const ExtendedLoss& loss, std::span<const double> point,
                                   std::span<const double> analytic,
                                   const GradientCheckOptions& options) {
  if (point.size() != analytic.size()) {
    throw ValidationError("check_gradient: gradient and point differ in length");
  }
  std::vector<long double> x(point.begin(), point.end());
  GradientCheckReport report;
  report.numeric.resize(x.size());
  const long double h = options.step;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double saved = x[i];
    x[i] = saved + h;
    const long double plus = loss(x);
    x[i] = saved - h;
    const long double minus = loss(x);
    x[i] = saved;
    const double numeric = static_cast<double>((plus - minus) / (2.0L * h));
    report.numeric[i] = numeric;
    const double error = std::abs(numeric - analytic[i]) /
                         std::max(options.denominator_floor, std::abs(analytic[i]));
    if (!(error <= options.tolerance)) ++report.failures;
    if (!(error <= report.max_relative_error)) {
      report.max_relative_error = error;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace marpo
