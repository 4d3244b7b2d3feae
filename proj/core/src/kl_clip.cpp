#include "marpo/kl_clip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "marpo/errors.hpp"

namespace marpo {
namespace {

constexpr double kMassTolerance = 1e-9;

void validate_distribution(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError(std::string(name) + ": entries must be finite and non-negative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw ValidationError(std::string(name) + ": masses sum to " + std::to_string(total) +
                          ", expected 1");
  }
}

void validate_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw ValidationError("distributions must be non-empty and of equal length");
  }
  validate_distribution(p, "p");
  validate_distribution(q, "q");
}

// Bisection on a bracket where f - target changes sign, then one Newton
// polish step that is kept only if it lowers the residual.
double find_root(double target, double lo, double hi) {
  auto g = [target](double x) { return f_estimator(x) - target; };
  const double g_lo = g(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double g_mid = g(mid);
    if (g_mid == 0.0) return mid;
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
  const double slope = 1.0 - 1.0 / x;
  if (slope != 0.0) {
    const double polished = x - g(x) / slope;
    if (polished > 0.0 && std::abs(g(polished)) < std::abs(g(x))) x = polished;
  }
  return x;
}

}  // namespace

ClipBounds ClipBounds::symmetric(double epsilon) {
  return ClipBounds{1.0 - epsilon, 1.0 + epsilon};
}

double f_estimator(double x) {
  if (!(x > 0.0)) {
    throw DomainError("f_estimator: x must be positive");
  }
  if (std::isinf(x)) return x;
  const double d = x - 1.0;
  if (x < 0.5 || x > 2.0) return d - std::log(x);
  return d - std::log1p(d);
}

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  validate_pair(p, q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw DivergenceError("kl_discrete: p has mass where q is zero");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double tv_discrete(std::span<const double> p, std::span<const double> q) {
  validate_pair(p, q);
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

double kl_estimator_expectation(std::span<const double> p_old,
                                std::span<const double> p_new) {
  validate_pair(p_old, p_new);
  double total = 0.0;
  for (std::size_t i = 0; i < p_old.size(); ++i) {
    if (p_old[i] == 0.0) {
      total += p_new[i];
      continue;
    }
    if (p_new[i] == 0.0) {
      throw DivergenceError("kl_estimator_expectation: p_new vanishes on the support of p_old");
    }
    total += p_old[i] * f_estimator(p_new[i] / p_old[i]);
  }
  return total;
}

double measured_kl(std::span<const std::vector<double>> old_dists,
                   std::span<const std::vector<double>> new_dists) {
  if (old_dists.empty()) {
    throw ValidationError("measured_kl: no distribution pairs");
  }
  if (old_dists.size() != new_dists.size()) {
    throw ValidationError("measured_kl: old and new lists differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < old_dists.size(); ++i) {
    sum += kl_discrete(old_dists[i], new_dists[i]);
  }
  return sum / static_cast<double>(old_dists.size());
}

KlController::KlController(double beta, double kl_bias)
    : KlController(beta, kl_bias, kl_bias) {}

KlController::KlController(double beta, double kl_bias, double target_kl)
    : target_kl_(target_kl), beta_(beta), kl_bias_(kl_bias) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw ValidationError("KlController: beta must lie in [0, 1)");
  }
  if (!(kl_bias >= 0.0) || !std::isfinite(kl_bias)) {
    throw ValidationError("KlController: kl_bias must be finite and non-negative");
  }
  if (!std::isfinite(target_kl) || target_kl < 0.0) {
    throw ValidationError("KlController: target must be finite and non-negative");
  }
}

KlController ema_update(const KlController& state, double measured) {
  if (!std::isfinite(measured) || measured < 0.0) {
    throw ValidationError("ema_update: measured KL must be finite and non-negative");
  }
  const double smoothed = state.beta() * state.target_kl() + (1.0 - state.beta()) * measured;
  return KlController(state.beta(), state.kl_bias(), std::max(state.kl_bias(), smoothed));
}

ClipBounds solve_bounds(double target) {
  if (!std::isfinite(target) || target < 0.0) {
    throw ValidationError("solve_bounds: target must be finite and non-negative");
  }
  if (target == 0.0) return ClipBounds{1.0, 1.0};

  double lo = 10.0 * std::numeric_limits<double>::epsilon();
  while (f_estimator(lo) <= target) {
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::denorm_min() * 4.0) {
      throw ValidationError("solve_bounds: target too large for a representable lower root");
    }
  }
  double hi = 2.0;
  while (f_estimator(hi) <= target) {
    hi *= 2.0;
    if (!std::isfinite(hi)) {
      throw ValidationError("solve_bounds: target too large for a representable upper root");
    }
  }

  ClipBounds bounds{find_root(target, lo, 1.0), find_root(target, 1.0, hi)};
  // Targets below the resolution of f near 1 can land on 1 itself.
  bounds.lower = std::min(bounds.lower, 1.0);
  bounds.upper = std::max(bounds.upper, 1.0);
  return bounds;
}

}  // namespace marpo
