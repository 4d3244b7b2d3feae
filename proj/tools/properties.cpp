#include "properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <vector>

#include "marpo/approximator.hpp"
#include "marpo/gradient_check.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/losses.hpp"
#include "marpo/objective.hpp"
#include "marpo/rollout.hpp"
#include "marpo/synthetic.hpp"

namespace marpo::props {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string printf_string(const char* fmt, auto... args) {
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer), fmt, args...);
  return buffer;
}

std::vector<double> draw_distribution(std::mt19937_64& rng, std::size_t size) {
  std::exponential_distribution<double> draw(1.0);
  std::uniform_real_distribution<double> power(0.2, 3.0);
  const double shape = power(rng);
  std::vector<double> p(size);
  double total = 0.0;
  for (double& v : p) {
    v = std::pow(draw(rng), shape) + 1e-6;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

double draw_log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

PropertyResult estimator_unbiasedness(std::size_t pairs, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> support(2, 16);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t k = support(rng);
    const auto p_old = draw_distribution(rng, k);
    const auto p_new = draw_distribution(rng, k);
    const double gap =
        std::abs(kl_estimator_expectation(p_old, p_new) - kl_discrete(p_old, p_new));
    worst = std::max(worst, gap);
  }
  PropertyResult r{"estimator_unbiasedness", false, "", seconds_since(start)};
  r.passed = worst <= 1e-12 && r.seconds < 1.0;
  r.detail = printf_string("%zu pairs, max |E f - KL| = %.3e (tol 1e-12)", pairs, worst);
  return r;
}

PropertyResult estimator_shape(std::size_t triples, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  std::size_t violations = 0;
  if (f_estimator(1.0) != 0.0) ++violations;
  for (std::size_t i = 0; i < triples; ++i) {
    double x1 = draw_log_uniform(rng, 1e-6, 1e3);
    double x2 = draw_log_uniform(rng, 1e-6, 1e3);
    if (i % 4 == 0) {
      x1 = 1.0 + (unit(rng) - 0.5) * 1e-3;
      x2 = 1.0 + (unit(rng) - 0.5) * 1e-3;
    }
    const double t = unit(rng);
    const double f1 = f_estimator(x1), f2 = f_estimator(x2);
    if (!(f1 >= 0.0) || !(f2 >= 0.0)) ++violations;
    if ((x1 != 1.0 && f1 == 0.0) || (x2 != 1.0 && f2 == 0.0)) ++violations;
    const double mid = t * x1 + (1.0 - t) * x2;
    const double lhs = f_estimator(mid);
    const double rhs = t * f1 + (1.0 - t) * f2;
    // Rounding budget of the three evaluations and of forming `mid`.
    const double slack = 8.0 * kEps * (std::abs(lhs) + std::abs(rhs) + std::abs(mid - 1.0) +
                                       std::abs(x1 - 1.0) + std::abs(x2 - 1.0));
    if (!(lhs <= rhs + slack)) ++violations;
  }
  PropertyResult r{"estimator_shape", violations == 0, "", seconds_since(start)};
  r.detail = printf_string("%zu triples, %zu violations of f>=0, unique zero, convexity",
                           triples, violations);
  return r;
}

PropertyResult root_solving(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(1e-8, 2.0);
  std::vector<double> targets(count);
  for (std::size_t i = 0; i < count; ++i) {
    targets[i] = i % 2 == 0 ? uniform(rng) : draw_log_uniform(rng, 1e-8, 2.0);
  }
  const auto start = Clock::now();
  std::vector<ClipBounds> bounds;
  bounds.reserve(count);
  for (double d : targets) bounds.push_back(solve_bounds(d));
  const double elapsed = seconds_since(start);

  double worst_residual = 0.0;
  std::size_t ordering = 0, asymmetry = 0, widening = 0;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) {
    const ClipBounds& b = bounds[i];
    worst_residual = std::max({worst_residual, std::abs(f_estimator(b.lower) - targets[i]),
                               std::abs(f_estimator(b.upper) - targets[i])});
    if (!(b.lower < 1.0 && 1.0 < b.upper)) ++ordering;
    if (!(1.0 - b.lower < b.upper - 1.0)) ++asymmetry;
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });
  for (std::size_t i = 1; i < count; ++i) {
    const std::size_t a = order[i - 1], b = order[i];
    if (targets[a] == targets[b]) continue;
    if (!(bounds[b].lower < bounds[a].lower && bounds[b].upper > bounds[a].upper)) ++widening;
  }
  PropertyResult r{"root_solving", false, "", elapsed};
  r.passed = worst_residual <= 1e-10 && ordering == 0 && asymmetry == 0 && widening == 0 &&
             elapsed < 1.0;
  r.detail = printf_string(
      "%zu targets, max residual %.3e (tol 1e-10), ordering %zu, asymmetry %zu, widening %zu "
      "violations",
      count, worst_residual, ordering, asymmetry, widening);
  return r;
}

PropertyResult ema_controller(std::size_t sequences, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> length(1, 40);
  double worst = 0.0;
  std::size_t below_floor = 0;
  for (std::size_t s = 0; s < sequences; ++s) {
    const double beta = unit(rng) * 0.999;
    const double kl_bias = unit(rng) * 0.2;
    KlController state(beta, kl_bias);
    double expected = kl_bias;
    const int n = length(rng);
    for (int i = 0; i < n; ++i) {
      const double measured = unit(rng) * 0.5;
      state = ema_update(state, measured);
      expected = std::max(kl_bias, beta * expected + (1.0 - beta) * measured);
      worst = std::max(worst, std::abs(state.target_kl() - expected));
      if (state.target_kl() < kl_bias) ++below_floor;
    }
  }
  PropertyResult r{"ema_controller", worst <= 1e-15 && below_floor == 0, "",
                   seconds_since(start)};
  r.detail = printf_string("%zu sequences, max deviation %.3e (tol 1e-15), %zu below floor",
                           sequences, worst, below_floor);
  return r;
}

PropertyResult gradient_checks(std::size_t batches, std::uint64_t seed, bool fault) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> target(0.01, 0.12);
  SyntheticBatchOptions options;
  NetworkConfig net;
  net.hidden_width = 16;
  net.hidden_layers = 2;
  std::size_t failed_batches = 0, parameter_count = 0;
  double worst = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    ParamSet params = make_params(net, options.obs_dim, options.action_count, options.state_dim,
                                  rng());
    // Larger output weights than the init so the policy is far from uniform.
    for (double& v : params.flat()) v *= 3.0;
    parameter_count = params.size();
    const ObjectiveBatch batch = make_synthetic_batch(params, options, rng());
    ObjectiveSettings settings;
    settings.algorithm = Algorithm::kMarpo;
    settings.loss.bounds = solve_bounds(target(rng));
    settings.loss.bounds_next = solve_bounds(target(rng));
    settings.loss.alpha = 0.5;
    settings.loss.sigma = 0.01;
    settings.loss.selection = b % 2 == 0 ? AdvantageSelection::kNext : AdvantageSelection::kCurrent;
    std::vector<double> analytic(params.size());
    evaluate_objective(params, batch, settings, analytic);
    if (fault) {
      auto peak = std::max_element(analytic.begin(), analytic.end(),
                                   [](double a, double c) { return std::abs(a) < std::abs(c); });
      *peak *= 1.0 + 1e-3;
    }
    const auto report = check_gradient(
        [&](std::span<const long double> x) {
          return objective_total<long double>(params, x, batch, settings);
        },
        params.flat(), analytic);
    worst = std::max(worst, report.max_relative_error);
    if (!report.passed()) ++failed_batches;
  }
  PropertyResult r{"gradient_checks", false, "", seconds_since(start)};
  r.passed = failed_batches == 0 && parameter_count <= 1000;
  r.detail = printf_string("%zu minibatches, %zu parameters, max rel error %.3e (tol 1e-5), "
                           "%zu failing",
                           batches, parameter_count, worst, failed_batches);
  return r;
}

PropertyResult mappo_reduction(std::size_t batches, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 64);
  double worst = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    LossInputs<double> in;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      const double old_lp = -std::abs(normal(rng));
      in.samples.push_back({old_lp + 0.3 * normal(rng), old_lp, normal(rng)});
      in.entropies.push_back(std::abs(normal(rng)));
      in.value_predictions.push_back(normal(rng));
      in.value_targets.push_back(normal(rng));
    }
    for (int j = 0; j < n / 2; ++j) {
      const double a = -std::abs(normal(rng)), c = -std::abs(normal(rng));
      in.pairs.push_back({a + 0.3 * normal(rng), a, c + 0.3 * normal(rng), c, normal(rng),
                          normal(rng)});
    }
    const double sigma = 0.01 * std::abs(normal(rng));
    const LossBreakdown marpo = marpo_loss(in, {0.8, 1.2}, {0.8, 1.2}, 0.0, sigma, 0.5);
    const LossBreakdown mappo = mappo_loss(in, 0.2, sigma, 0.5);
    worst = std::max({worst, std::abs(marpo.total - mappo.total), std::abs(marpo.l0 - mappo.l0),
                      std::abs(marpo.entropy - mappo.entropy),
                      std::abs(marpo.value_loss - mappo.value_loss)});
  }

  // Same check through the networks, gradients included.
  NetworkConfig net;
  net.hidden_width = 16;
  SyntheticBatchOptions options;
  for (std::size_t b = 0; b < 10; ++b) {
    const ParamSet params =
        make_params(net, options.obs_dim, options.action_count, options.state_dim, rng());
    const ObjectiveBatch batch = make_synthetic_batch(params, options, rng());
    ObjectiveSettings reflective_off;
    reflective_off.algorithm = Algorithm::kMarpo;
    reflective_off.loss.bounds = reflective_off.loss.bounds_next = {0.8, 1.2};
    reflective_off.loss.alpha = 0.0;
    ObjectiveSettings baseline = reflective_off;
    baseline.algorithm = Algorithm::kMappo;
    baseline.epsilon = 0.2;
    std::vector<double> g1(params.size()), g2(params.size());
    const double t1 = evaluate_objective(params, batch, reflective_off, g1).total;
    const double t2 = evaluate_objective(params, batch, baseline, g2).total;
    worst = std::max(worst, std::abs(t1 - t2));
    for (std::size_t i = 0; i < g1.size(); ++i) worst = std::max(worst, std::abs(g1[i] - g2[i]));
  }
  PropertyResult r{"mappo_reduction", worst <= 1e-12, "", seconds_since(start)};
  r.detail = printf_string("%zu loss batches + 10 network batches, max gap %.3e (tol 1e-12)",
                           batches, worst);
  return r;
}

PropertyResult gae_oracle(std::size_t trajectories, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(1, 60);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  std::uniform_real_distribution<double> discount(0.8, 1.0);
  std::size_t mismatches = 0;
  double worst_forward = 0.0;
  for (std::size_t k = 0; k < trajectories; ++k) {
    Trajectory traj;
    const int n = length(rng);
    for (int t = 0; t < n; ++t) {
      Transition step;
      step.step_index = static_cast<std::size_t>(t);
      step.reward = reward(rng);
      step.done = t + 1 == n;
      traj.steps.push_back(step);
    }
    const double gamma = discount(rng);
    const GaeResult result = gae(traj, gamma, 1.0);
    double running = 0.0;
    for (int t = n - 1; t >= 0; --t) {
      running = traj.steps[static_cast<std::size_t>(t)].reward + gamma * running;
      if (result.advantages[static_cast<std::size_t>(t)] != running) ++mismatches;
    }
    for (int t = 0; t < n; ++t) {
      double forward = 0.0, scale = 1.0;
      for (int u = t; u < n; ++u) {
        forward += scale * traj.steps[static_cast<std::size_t>(u)].reward;
        scale *= gamma;
      }
      worst_forward = std::max(
          worst_forward, std::abs(forward - result.advantages[static_cast<std::size_t>(t)]));
    }
  }
  Trajectory hand;
  for (int t = 0; t < 2; ++t) {
    Transition step;
    step.step_index = static_cast<std::size_t>(t);
    step.reward = t == 0 ? 0.0 : 1.0;
    step.done = t == 1;
    hand.steps.push_back(step);
  }
  const GaeResult two = gae(hand, 0.9, 0.95);
  const double hand_gap =
      std::max(std::abs(two.advantages[0] - 0.855), std::abs(two.advantages[1] - 1.0));
  PropertyResult r{"gae_oracle", false, "", seconds_since(start)};
  r.passed = mismatches == 0 && worst_forward <= 1e-12 && hand_gap <= 1e-12;
  r.detail = printf_string(
      "%zu trajectories, %zu inexact vs backward returns, forward-sum gap %.3e, "
      "two-step gap %.3e (tol 1e-12)",
      trajectories, mismatches, worst_forward, hand_gap);
  return r;
}

std::string format_line(const PropertyResult& result) {
  return printf_string("%s %-24s %s [%.3fs]", result.passed ? "PASS" : "FAIL",
                       result.name.c_str(), result.detail.c_str(), result.seconds);
}

}  // namespace marpo::props
