#include "marpo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <random>

#include "marpo/errors.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/objective.hpp"
#include "marpo/rollout.hpp"
#include "marpo/run_io.hpp"

namespace marpo {
namespace {

constexpr std::size_t kMaxConsecutiveAborts = 3;

struct Preset {
  const char* name;
  double kl_bias;
  double beta;
};

// (KL bias, EMA rate) pairs.
constexpr Preset kPresets[] = {
    {"marpo1", 0.05, 0.05},
    {"marpo2", 0.08, 0.08},
    {"marpo3", 0.10, 0.08},
    {"marpo4", 0.10, 0.01},
};

void require(bool ok, const char* message) {
  if (!ok) throw ValidationError(message);
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.l0) && std::isfinite(b.l1) &&
         std::isfinite(b.entropy) && std::isfinite(b.value_loss);
}

MetricsRow aborted_row(std::size_t iteration, std::size_t env_steps) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return MetricsRow{iteration, env_steps, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan};
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const TrainConfig& c) {
  require(c.iterations >= 1, "iterations must be >= 1");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.minibatch_size >= 1, "minibatch_size must be >= 1");
  require(c.rollout_steps >= 1, "rollout_steps must be >= 1");
  require(c.alpha >= 0.0 && std::isfinite(c.alpha), "alpha must be finite and >= 0");
  require(c.sigma >= 0.0 && std::isfinite(c.sigma), "sigma must be finite and >= 0");
  require(c.beta >= 0.0 && c.beta < 1.0, "beta must lie in [0, 1)");
  require(c.kl_bias >= 0.0 && std::isfinite(c.kl_bias), "kl_bias must be finite and >= 0");
  require(c.baseline_epsilon > 0.0 && c.baseline_epsilon < 1.0,
          "baseline_epsilon must lie in (0, 1)");
  require(c.learning_rate >= 0.0 && std::isfinite(c.learning_rate),
          "learning_rate must be finite and >= 0");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma must lie in [0, 1]");
  require(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda must lie in [0, 1]");
  require(!c.env_name.empty(), "env_name is required");
  require(c.eval_episodes >= 1, "eval_episodes must be >= 1");
  require(c.eval_interval >= 1, "eval_interval must be >= 1");
  require(c.next_target_scale > 0.0 && std::isfinite(c.next_target_scale),
          "next_target_scale must be finite and > 0");
  require(c.value_coef >= 0.0 && std::isfinite(c.value_coef), "value_coef must be >= 0");
  require(c.hidden_width >= 1, "hidden_width must be >= 1");
  (void)make_environment(c.env_name);
}

std::optional<TrainConfig> apply_preset(TrainConfig config, std::string_view name) {
  for (const Preset& p : kPresets) {
    if (name == p.name) {
      config.kl_bias = p.kl_bias;
      config.beta = p.beta;
      return config;
    }
  }
  return std::nullopt;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const Preset& p : kPresets) names.emplace_back(p.name);
  return names;
}

namespace {

std::size_t greedy_action(const ActionDistribution& dist, std::mt19937_64& rng) {
  const std::size_t best = dist.argmax();
  std::vector<std::size_t> ties;
  for (std::size_t a = 0; a < dist.size(); ++a) {
    if (dist[a] == dist[best]) ties.push_back(a);
  }
  if (ties.size() == 1) return best;
  return ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];
}

}  // namespace

EvalResult evaluate(const ParamSet& params, Environment& env, std::size_t episodes,
                    std::uint64_t seed) {
  if (episodes == 0) throw ValidationError("evaluate: episodes must be >= 1");
  const EnvSpec& spec = env.spec();
  EvalResult result;
  std::vector<std::size_t> joint(spec.n_agents);
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation obs = env.reset(mix_seed(seed, e));
    std::mt19937_64 tie_rng(mix_seed(~seed, e));
    double total = 0.0;
    double discounted = 0.0;
    double discount = 1.0;
    bool success = false;
    for (std::size_t t = 0; t < spec.max_steps; ++t) {
      for (std::size_t i = 0; i < spec.n_agents; ++i) {
        joint[i] = greedy_action(policy_forward(params, obs.agent_obs[i]), tie_rng);
      }
      StepResult step = env.step(joint);
      total += step.reward;
      discounted += discount * step.reward;
      discount *= spec.gamma;
      success = step.success;
      obs.agent_obs = std::move(step.observations);
      obs.global_state = std::move(step.global_state);
      if (step.done) break;
    }
    result.win_rate += success ? 1.0 : 0.0;
    result.mean_return += total;
    result.mean_discounted_return += discounted;
  }
  const double n = static_cast<double>(episodes);
  result.win_rate /= n;
  result.mean_return /= n;
  result.mean_discounted_return /= n;
  return result;
}

RunReport train(const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  std::unique_ptr<Environment> env = make_environment(config.env_name);
  std::unique_ptr<Environment> eval_env = env->clone();
  const EnvSpec spec = env->spec();

  RunReport report;
  report.config = config;
  report.run_id = run_id(config);

  NetworkConfig net;
  net.hidden_width = config.hidden_width;
  net.hidden_layers = config.hidden_layers;
  ParamSet params = make_params(net, spec.obs_dim, spec.action_count, spec.state_dim,
                                mix_seed(config.seed, 0));
  OptimizerState optimizer;
  optimizer.kind = config.optimizer;
  KlController controller(config.beta, config.kl_bias);

  const bool reflective = config.algorithm == Algorithm::kMarpo && config.alpha > 0.0;
  const std::size_t rollout_steps = std::max(config.rollout_steps, spec.max_steps);
  std::vector<double> gradient(params.size());

  EvalResult last_eval = evaluate(params, *eval_env, config.eval_episodes,
                                  mix_seed(config.seed, 0x5eed));
  std::size_t env_steps = 0;
  std::size_t consecutive_aborts = 0;

  for (std::size_t iteration = 1; iteration <= config.iterations; ++iteration) {
    const std::uint64_t iteration_seed = mix_seed(config.seed, iteration);
    const Rollout rollout = collect(*env, params, rollout_steps, mix_seed(iteration_seed, 1));
    env_steps += rollout.env_steps;

    std::vector<GaeResult> advantages;
    advantages.reserve(rollout.trajectories.size());
    for (const Trajectory& t : rollout.trajectories) {
      advantages.push_back(gae(t, config.gamma, config.lambda));
    }
    const AdvantageBatch batch =
        build_batch(rollout.trajectories, advantages, config.normalize_advantages);

    const ParamSet params_before = params;
    const OptimizerState optimizer_before = optimizer;
    const KlController controller_before = controller;

    MetricsRow row;
    row.iteration = iteration;
    row.env_steps = env_steps;
    std::size_t updates = 0;
    bool aborted = false;

    for (std::size_t epoch = 0; epoch < config.epochs && !aborted; ++epoch) {
      const auto slices =
          minibatches(batch, config.minibatch_size, mix_seed(iteration_seed, 100 + epoch));
      for (const auto& slice : slices) {
        const ObjectiveBatch mb = assemble_minibatch(batch, slice, reflective);

        double measured = 0.0;
        try {
          measured = measured_kl(mb.old_distributions, current_distributions(params, mb));
        } catch (const std::domain_error&) {
          aborted = true;
          break;
        }
        controller = ema_update(controller, measured);

        ObjectiveSettings settings;
        settings.algorithm = config.algorithm;
        settings.epsilon = config.baseline_epsilon;
        settings.loss.alpha = config.alpha;
        settings.loss.sigma = config.sigma;
        settings.loss.value_coef = config.value_coef;
        settings.loss.selection = config.advantage_selection;
        settings.loss.reflective = reflective;
        if (config.algorithm == Algorithm::kMappo || config.clip_mode == ClipMode::kFixed) {
          settings.loss.bounds = ClipBounds::symmetric(config.baseline_epsilon);
          settings.loss.bounds_next = settings.loss.bounds;
        } else {
          settings.loss.bounds = solve_bounds(controller.target_kl());
          settings.loss.bounds_next =
              config.next_target_scale == 1.0
                  ? settings.loss.bounds
                  : solve_bounds(controller.target_kl() * config.next_target_scale);
        }

        LossBreakdown loss = evaluate_objective(params, mb, settings, gradient);
        loss.measured_kl = measured;
        if (hooks.on_loss) hooks.on_loss(iteration, loss);
        if (!finite(loss)) {
          aborted = true;
          break;
        }
        try {
          sgd_step(params, gradient, config.learning_rate, optimizer);
        } catch (const NonFiniteGradientError& e) {
          std::cerr << "iteration " << iteration << ": update skipped: " << e.what() << '\n';
        }
        if (hooks.on_update) hooks.on_update(params);

        ++updates;
        row.measured_kl += measured;
        row.clip_fraction += loss.clip_fraction;
        row.l0 += loss.l0;
        row.l1 += loss.l1;
        row.entropy += loss.entropy;
        row.value_loss += loss.value_loss;
        row.target_kl = controller.target_kl();
        row.bound_lower = settings.loss.bounds.lower;
        row.bound_upper = settings.loss.bounds.upper;
      }
    }

    if (aborted) {
      params = params_before;
      optimizer = optimizer_before;
      controller = controller_before;
      ++report.aborted_iterations;
      MetricsRow bad = aborted_row(iteration, env_steps);
      if (config.record_wall_time) bad.wall_time_s = elapsed();
      report.rows.push_back(bad);
      report.training_returns.push_back(std::numeric_limits<double>::quiet_NaN());
      if (hooks.on_row) hooks.on_row(bad);
      std::cerr << "iteration " << iteration << ": non-finite loss, iteration aborted\n";
      if (++consecutive_aborts >= kMaxConsecutiveAborts) {
        throw TrainingError("training failed: " + std::to_string(kMaxConsecutiveAborts) +
                            " consecutive iterations produced a non-finite loss (last at " +
                            std::to_string(iteration) + ")");
      }
      continue;
    }
    consecutive_aborts = 0;

    const double n = static_cast<double>(updates);
    row.measured_kl /= n;
    row.clip_fraction /= n;
    row.l0 /= n;
    row.l1 /= n;
    row.entropy /= n;
    row.value_loss /= n;
    if (iteration % config.eval_interval == 0 || iteration == config.iterations) {
      last_eval = evaluate(params, *eval_env, config.eval_episodes,
                           mix_seed(config.seed, 0x5eed + iteration));
    }
    row.mean_return = last_eval.mean_return;
    row.win_rate = last_eval.win_rate;
    row.wall_time_s = config.record_wall_time ? elapsed() : 0.0;
    report.rows.push_back(row);
    double sampled_return = 0.0;
    for (double r : rollout.episode_returns) sampled_return += r;
    report.training_returns.push_back(sampled_return /
                                      static_cast<double>(rollout.episode_returns.size()));
    if (hooks.on_row) hooks.on_row(row);
  }

  report.final_eval = last_eval;
  report.params = std::move(params);
  report.wall_time_s = elapsed();
  return report;
}

}  // namespace marpo
