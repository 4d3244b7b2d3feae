#ifndef MARPO_KL_CLIP_HPP_
#define MARPO_KL_CLIP_HPP_

#include <span>
#include <vector>

namespace marpo {

/// Asymmetric clipping interval [lower, upper] around ratio 1.
struct ClipBounds {
  double lower = 1.0;
  double upper = 1.0;

  /// PPO-style symmetric interval [1 - epsilon, 1 + epsilon].
  static ClipBounds symmetric(double epsilon);

  bool contains(double ratio) const { return lower <= ratio && ratio <= upper; }
  friend bool operator==(const ClipBounds&, const ClipBounds&) = default;
};

/// f(x) = x - 1 - ln x. Non-negative and convex on x > 0, zero only at x = 1.
/// Its expectation under the old policy with x = p_new / p_old is exactly
/// KL(p_old || p_new). Throws DomainError for x <= 0 or NaN.
double f_estimator(double x);

/// Σ p ln(p / q) in nats, with 0 ln(0/q) = 0.
/// Throws ValidationError for mismatched lengths, negative entries or masses
/// that do not sum to 1 within 1e-9; DivergenceError if p > 0 where q = 0.
double kl_discrete(std::span<const double> p, std::span<const double> q);

/// ½ Σ |p - q|. Diagnostic only.
double tv_discrete(std::span<const double> p, std::span<const double> q);

/// Σ_a p_old(a) f(p_new(a) / p_old(a)). Actions with p_old = 0 contribute
/// their limit p_new(a). Equals kl_discrete(p_old, p_new) for normalized inputs.
double kl_estimator_expectation(std::span<const double> p_old,
                                std::span<const double> p_new);

/// Mean of kl_discrete(old[i], new[i]) over all pairs.
double measured_kl(std::span<const std::vector<double>> old_dists,
                   std::span<const std::vector<double>> new_dists);

/// EMA-tracked KL target. `beta` is the retention of the previous target and
/// `kl_bias` is a floor every updated target respects.
class KlController {
 public:
  /// The target starts at the floor.
  KlController(double beta, double kl_bias);
  KlController(double beta, double kl_bias, double target_kl);

  double target_kl() const { return target_kl_; }
  double beta() const { return beta_; }
  double kl_bias() const { return kl_bias_; }

 private:
  double target_kl_;
  double beta_;
  double kl_bias_;
};

/// target' = max(kl_bias, beta * target + (1 - beta) * measured).
/// Throws ValidationError when measured is negative or non-finite.
KlController ema_update(const KlController& state, double measured);

/// Both roots of f(x) = target: lower in (0, 1], upper in [1, inf).
/// Each root satisfies |f(root) - target| <= 1e-10; target 0 yields (1, 1).
/// Throws ValidationError for negative or non-finite targets.
ClipBounds solve_bounds(double target);

}  // namespace marpo

#endif  // MARPO_KL_CLIP_HPP_
