#ifndef MARPO_LOSSES_HPP_
#define MARPO_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "marpo/errors.hpp"
#include "marpo/kl_clip.hpp"

namespace marpo {

enum class Algorithm { kMarpo, kMappo };

/// Which advantage multiplies the unclipped branch of the reflective term.
/// kNext uses A^{k+1} in both branches; kCurrent uses A^k in the unclipped
/// branch and A^{k+1} in the clipped one.
enum class AdvantageSelection { kNext, kCurrent };

/// Log-ratio magnitude beyond which the ratio is clamped.
inline constexpr double kMaxLogRatio = 30.0;

template <typename Scalar>
struct Ratio {
  Scalar value;
  Scalar derivative;  // d value / d new_log_prob; 0 when clamped
  bool clamped;
};

template <typename Scalar>
Ratio<Scalar> compute_ratio(Scalar new_log_prob, Scalar old_log_prob) {
  using std::exp;
  const Scalar diff = new_log_prob - old_log_prob;
  const Scalar limit = static_cast<Scalar>(kMaxLogRatio);
  if (diff > limit || diff < -limit) {
    const Scalar clamped = diff > limit ? limit : -limit;
    return {exp(clamped), Scalar(0), true};
  }
  const Scalar value = exp(diff);
  return {value, value, false};
}

/// exp(new - old) with the log difference clamped to ±30.
double ratio(double new_log_prob, double old_log_prob);

template <typename Scalar>
struct PolicySample {
  Scalar new_log_prob;
  Scalar old_log_prob;
  Scalar advantage;
};

template <typename Scalar>
struct ReflectiveSample {
  Scalar new_log_prob;
  Scalar old_log_prob;
  Scalar new_log_prob_next;
  Scalar old_log_prob_next;
  Scalar advantage;       // A^k
  Scalar advantage_next;  // A^{k+1}
};

/// Value of one surrogate term with the active-branch derivatives.
template <typename Scalar>
struct SurrogateTerm {
  Scalar value;
  Scalar d_new_log_prob;
  Scalar d_new_log_prob_next;
  bool clipped;  // clip(ρ) != ρ for the step-k ratio
  bool clamped;
};

template <typename Scalar>
Scalar clip_value(Scalar x, const ClipBounds& bounds) {
  const auto lo = static_cast<Scalar>(bounds.lower);
  const auto hi = static_cast<Scalar>(bounds.upper);
  return x < lo ? lo : (x > hi ? hi : x);
}

/// min(ρ A, clip(ρ, lower, upper) A). Ties go to the unclipped branch.
template <typename Scalar>
SurrogateTerm<Scalar> clipped_term(const PolicySample<Scalar>& s, const ClipBounds& bounds) {
  const Ratio<Scalar> r = compute_ratio(s.new_log_prob, s.old_log_prob);
  const Scalar clipped_ratio = clip_value(r.value, bounds);
  const Scalar unclipped = r.value * s.advantage;
  const Scalar clipped = clipped_ratio * s.advantage;
  const bool inside = clipped_ratio == r.value;
  SurrogateTerm<Scalar> term{unclipped, r.derivative * s.advantage, Scalar(0), !inside, r.clamped};
  if (clipped < unclipped) {
    term.value = clipped;
    term.d_new_log_prob = inside ? r.derivative * s.advantage : Scalar(0);
  }
  return term;
}

/// min(ρ^k ρ^{k+1} A_sel, clip(ρ^k) clip'(ρ^{k+1}) A^{k+1}).
template <typename Scalar>
SurrogateTerm<Scalar> reflective_term(const ReflectiveSample<Scalar>& s, const ClipBounds& bounds,
                                      const ClipBounds& bounds_next,
                                      AdvantageSelection selection = AdvantageSelection::kNext) {
  const Ratio<Scalar> r = compute_ratio(s.new_log_prob, s.old_log_prob);
  const Ratio<Scalar> r_next = compute_ratio(s.new_log_prob_next, s.old_log_prob_next);
  const Scalar a_sel = selection == AdvantageSelection::kNext ? s.advantage_next : s.advantage;
  const Scalar c = clip_value(r.value, bounds);
  const Scalar c_next = clip_value(r_next.value, bounds_next);
  const bool inside = c == r.value;
  const bool inside_next = c_next == r_next.value;

  const Scalar unclipped = r.value * r_next.value * a_sel;
  const Scalar clipped = c * c_next * s.advantage_next;
  SurrogateTerm<Scalar> term{unclipped, r.derivative * r_next.value * a_sel,
                             r.value * r_next.derivative * a_sel, !inside,
                             r.clamped || r_next.clamped};
  if (clipped < unclipped) {
    term.value = clipped;
    term.d_new_log_prob = inside ? r.derivative * c_next * s.advantage_next : Scalar(0);
    term.d_new_log_prob_next = inside_next ? c * r_next.derivative * s.advantage_next : Scalar(0);
  }
  return term;
}

/// Mean clipped surrogate over samples (0 for an empty batch).
template <typename Scalar>
Scalar l0_clip(std::span<const PolicySample<Scalar>> samples, const ClipBounds& bounds) {
  if (samples.empty()) return Scalar(0);
  Scalar total = 0;
  for (const auto& s : samples) total += clipped_term(s, bounds).value;
  return total / static_cast<Scalar>(samples.size());
}

/// Mean reflective surrogate over consecutive pairs (0 for no pairs).
template <typename Scalar>
Scalar l1_clip(std::span<const ReflectiveSample<Scalar>> pairs, const ClipBounds& bounds,
               const ClipBounds& bounds_next,
               AdvantageSelection selection = AdvantageSelection::kNext) {
  if (pairs.empty()) return Scalar(0);
  Scalar total = 0;
  for (const auto& p : pairs) total += reflective_term(p, bounds, bounds_next, selection).value;
  return total / static_cast<Scalar>(pairs.size());
}

/// Mean squared error between critic predictions and value targets.
template <typename Scalar>
Scalar value_loss(std::span<const Scalar> predictions, std::span<const Scalar> targets) {
  if (predictions.size() != targets.size()) {
    throw ValidationError("value_loss: predictions and targets differ in length");
  }
  if (predictions.empty()) return Scalar(0);
  Scalar total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Scalar e = predictions[i] - targets[i];
    total += e * e;
  }
  return total / static_cast<Scalar>(predictions.size());
}

/// Everything the surrogate needs for one minibatch, already evaluated under
/// the current parameters.
template <typename Scalar>
struct LossInputs {
  std::vector<PolicySample<Scalar>> samples;
  std::vector<ReflectiveSample<Scalar>> pairs;
  std::vector<Scalar> entropies;  // one per sample
  std::vector<Scalar> value_predictions;
  std::vector<Scalar> value_targets;
};

struct LossSettings {
  ClipBounds bounds{0.8, 1.2};
  ClipBounds bounds_next{0.8, 1.2};
  double alpha = 0.5;
  double sigma = 0.01;
  double value_coef = 0.5;
  AdvantageSelection selection = AdvantageSelection::kNext;
  /// When false the reflective term is skipped and reported as 0.
  bool reflective = true;
};

/// l0, l1 and entropy carry the maximization sign;
/// total = -(l0 + alpha l1 + sigma entropy) + value_coef value_loss.
struct LossBreakdown {
  double l0 = 0.0;
  double l1 = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double total = 0.0;
  double measured_kl = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  std::size_t clamped_ratios = 0;
};

/// d total / d input, per entry of the corresponding LossInputs vectors.
template <typename Scalar>
struct LossGradient {
  std::vector<Scalar> d_log_prob;       // per sample
  std::vector<Scalar> d_pair_log_prob;  // per pair, step k
  std::vector<Scalar> d_pair_log_prob_next;
  std::vector<Scalar> d_entropy;  // per sample
  std::vector<Scalar> d_value_prediction;
};

template <typename Scalar>
struct SurrogateResult {
  Scalar l0 = 0, l1 = 0, entropy = 0, value_loss = 0, total = 0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  std::size_t clamped_ratios = 0;
};

/// Evaluates the full surrogate and, when `grad` is non-null, its partial
/// derivatives with respect to every input.
template <typename Scalar>
SurrogateResult<Scalar> evaluate_surrogate(const LossInputs<Scalar>& in,
                                           const LossSettings& settings,
                                           LossGradient<Scalar>* grad = nullptr) {
  const std::size_t n = in.samples.size();
  if (in.entropies.size() != n) {
    throw ValidationError("evaluate_surrogate: one entropy per sample required");
  }
  if (settings.alpha < 0.0) throw ValidationError("evaluate_surrogate: alpha must be >= 0");
  SurrogateResult<Scalar> out;
  const bool use_pairs = settings.reflective && !in.pairs.empty();
  const std::size_t m = use_pairs ? in.pairs.size() : 0;
  if (grad) {
    grad->d_log_prob.assign(n, Scalar(0));
    grad->d_pair_log_prob.assign(in.pairs.size(), Scalar(0));
    grad->d_pair_log_prob_next.assign(in.pairs.size(), Scalar(0));
    grad->d_entropy.assign(n, Scalar(0));
    grad->d_value_prediction.assign(in.value_predictions.size(), Scalar(0));
  }
  const auto alpha = static_cast<Scalar>(settings.alpha);
  const auto sigma = static_cast<Scalar>(settings.sigma);
  const auto value_coef = static_cast<Scalar>(settings.value_coef);

  std::size_t clipped = 0;
  double ratio_sum = 0.0;
  if (n > 0) {
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto term = clipped_term(in.samples[i], settings.bounds);
      out.l0 += term.value;
      out.entropy += in.entropies[i];
      clipped += term.clipped ? 1 : 0;
      out.clamped_ratios += term.clamped ? 1 : 0;
      ratio_sum += static_cast<double>(
          compute_ratio(in.samples[i].new_log_prob, in.samples[i].old_log_prob).value);
      if (grad) {
        grad->d_log_prob[i] = -term.d_new_log_prob * inv_n;
        grad->d_entropy[i] = -sigma * inv_n;
      }
    }
    out.l0 *= inv_n;
    out.entropy *= inv_n;
    out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
    out.mean_ratio = ratio_sum / static_cast<double>(n);
  }
  if (m > 0) {
    const Scalar inv_m = Scalar(1) / static_cast<Scalar>(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto term =
          reflective_term(in.pairs[j], settings.bounds, settings.bounds_next, settings.selection);
      out.l1 += term.value;
      out.clamped_ratios += term.clamped ? 1 : 0;
      if (grad) {
        grad->d_pair_log_prob[j] = -alpha * term.d_new_log_prob * inv_m;
        grad->d_pair_log_prob_next[j] = -alpha * term.d_new_log_prob_next * inv_m;
      }
    }
    out.l1 *= inv_m;
  }
  out.value_loss = value_loss<Scalar>(in.value_predictions, in.value_targets);
  if (grad && !in.value_predictions.empty()) {
    const Scalar scale =
        Scalar(2) * value_coef / static_cast<Scalar>(in.value_predictions.size());
    for (std::size_t i = 0; i < in.value_predictions.size(); ++i) {
      grad->d_value_prediction[i] = scale * (in.value_predictions[i] - in.value_targets[i]);
    }
  }
  out.total = -(out.l0 + alpha * out.l1 + sigma * out.entropy) + value_coef * out.value_loss;
  return out;
}

/// Baseline objective: symmetric clip [1 - epsilon, 1 + epsilon], entropy
/// bonus, no reflective term (l1 = 0).
LossBreakdown mappo_loss(const LossInputs<double>& inputs, double epsilon, double sigma,
                         double value_coef = 0.5);

/// L0 + alpha L1 with the given (possibly asymmetric) bounds plus the same
/// entropy bonus and value loss as the baseline.
LossBreakdown marpo_loss(const LossInputs<double>& inputs, const ClipBounds& bounds,
                         const ClipBounds& bounds_next, double alpha, double sigma,
                         double value_coef = 0.5,
                         AdvantageSelection selection = AdvantageSelection::kNext);

LossBreakdown to_breakdown(const SurrogateResult<double>& result);

}  // namespace marpo

#endif  // MARPO_LOSSES_HPP_
