#include "marpo/losses.hpp"

namespace marpo {

double ratio(double new_log_prob, double old_log_prob) {
  if (!std::isfinite(new_log_prob) || !std::isfinite(old_log_prob)) {
    throw ValidationError("ratio: log-probabilities must be finite");
  }
  return compute_ratio(new_log_prob, old_log_prob).value;
}

LossBreakdown to_breakdown(const SurrogateResult<double>& r) {
  LossBreakdown b;
  b.l0 = r.l0;
  b.l1 = r.l1;
  b.entropy = r.entropy;
  b.value_loss = r.value_loss;
  b.total = r.total;
  b.clip_fraction = r.clip_fraction;
  b.mean_ratio = r.mean_ratio;
  b.clamped_ratios = r.clamped_ratios;
  return b;
}

LossBreakdown mappo_loss(const LossInputs<double>& inputs, double epsilon, double sigma,
                         double value_coef) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("mappo_loss: epsilon must lie in (0, 1)");
  }
  LossSettings settings;
  settings.bounds = ClipBounds::symmetric(epsilon);
  settings.bounds_next = settings.bounds;
  settings.alpha = 0.0;
  settings.sigma = sigma;
  settings.value_coef = value_coef;
  settings.reflective = false;
  return to_breakdown(evaluate_surrogate(inputs, settings));
}

LossBreakdown marpo_loss(const LossInputs<double>& inputs, const ClipBounds& bounds,
                         const ClipBounds& bounds_next, double alpha, double sigma,
                         double value_coef, AdvantageSelection selection) {
  LossSettings settings;
  settings.bounds = bounds;
  settings.bounds_next = bounds_next;
  settings.alpha = alpha;
  settings.sigma = sigma;
  settings.value_coef = value_coef;
  settings.selection = selection;
  return to_breakdown(evaluate_surrogate(inputs, settings));
}

}  // namespace marpo
