#ifndef MARPO_TRAINER_HPP_
#define MARPO_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "marpo/approximator.hpp"
#include "marpo/env.hpp"
#include "marpo/losses.hpp"

namespace marpo {

enum class ClipMode {
  kDynamic,  // bounds solved from the EMA-tracked KL target
  kFixed,    // symmetric [1 - baseline_epsilon, 1 + baseline_epsilon]
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::kMarpo;
  std::size_t iterations = 40;
  std::size_t epochs = 5;
  std::size_t minibatch_size = 256;
  std::size_t rollout_steps = 512;  // environment steps per iteration
  double alpha = 0.5;               // weight of the reflective term
  double sigma = 0.01;              // entropy coefficient
  double beta = 0.9;                // EMA retention of the KL target
  double kl_bias = 0.05;            // floor of the KL target
  double baseline_epsilon = 0.2;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  std::uint64_t seed = 1;
  std::string env_name;  // required: matrix, commit2 or spread
  std::size_t eval_episodes = 16;
  std::size_t eval_interval = 1;

  ClipMode clip_mode = ClipMode::kDynamic;
  AdvantageSelection advantage_selection = AdvantageSelection::kNext;
  /// Multiplier on the KL target used for the step-(k+1) bounds.
  double next_target_scale = 1.0;
  double value_coef = 0.5;
  bool normalize_advantages = true;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 2;
  /// Off by default so that metrics files are reproducible byte for byte.
  bool record_wall_time = false;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws ValidationError describing the first invalid field.
void validate(const TrainConfig& config);

/// Named (kl_bias, beta) settings: marpo1 (0.05, 0.05), marpo2 (0.08, 0.08),
/// marpo3 (0.10, 0.08), marpo4 (0.10, 0.01).
std::optional<TrainConfig> apply_preset(TrainConfig config, std::string_view name);
std::vector<std::string> preset_names();

struct MetricsRow {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double mean_return = 0.0;
  double win_rate = 0.0;
  double measured_kl = 0.0;
  double target_kl = 0.0;
  double bound_lower = 0.0;
  double bound_upper = 0.0;
  double clip_fraction = 0.0;
  double l0 = 0.0;
  double l1 = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double wall_time_s = 0.0;
};

struct EvalResult {
  double win_rate = 0.0;
  double mean_return = 0.0;             // undiscounted
  double mean_discounted_return = 0.0;  // J(θ) estimate with the env's gamma
};

/// Greedy (argmax) rollouts; exact ties are broken uniformly at random with a
/// seeded generator. Episode i resets the environment with a seed
/// derived from `seed` and i.
EvalResult evaluate(const ParamSet& params, Environment& env, std::size_t episodes,
                    std::uint64_t seed);

struct RunReport {
  TrainConfig config;
  std::string run_id;
  std::vector<MetricsRow> rows;
  EvalResult final_eval;
  ParamSet params;
  /// Mean undiscounted return of the sampled training episodes, per row.
  std::vector<double> training_returns;
  std::size_t aborted_iterations = 0;
  double wall_time_s = 0.0;
};

struct TrainHooks {
  /// Called after every minibatch loss evaluation; may modify the loss.
  std::function<void(std::size_t iteration, LossBreakdown&)> on_loss;
  /// Called after each gradient step with the updated parameters.
  std::function<void(const ParamSet&)> on_update;
  std::function<void(const MetricsRow&)> on_row;
};

/// Collect, estimate advantages, then K epochs of minibatch updates per
/// iteration. Every minibatch measures the true KL between the stored and
/// current policies, advances the EMA target, solves the clipping bounds and
/// takes one gradient step on the combined policy/value loss. An iteration
/// whose loss turns non-finite is rolled back and recorded as NaN; three in a
/// row raise TrainingError.
RunReport train(const TrainConfig& config, const TrainHooks& hooks = {});

/// 64-bit mixing of two seeds (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace marpo

#endif  // MARPO_TRAINER_HPP_
