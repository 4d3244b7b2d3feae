#ifndef MARPO_ROLLOUT_HPP_
#define MARPO_ROLLOUT_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "marpo/approximator.hpp"
#include "marpo/env.hpp"

namespace marpo {

/// One agent's view of one environment step.
struct Transition {
  std::size_t agent_id = 0;
  std::size_t step_index = 0;
  std::vector<double> obs;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  std::vector<double> old_distribution;
  double reward = 0.0;
  double value_estimate = 0.0;
  bool done = false;
  std::vector<double> global_state;
};

/// One agent's transitions over one episode. `bootstrap_value` is the critic
/// value after the last step when the episode was truncated rather than
/// terminated; it is 0 for terminal episodes.
struct Trajectory {
  std::size_t episode = 0;
  std::size_t agent_id = 0;
  std::vector<Transition> steps;
  double bootstrap_value = 0.0;
};

struct Rollout {
  std::vector<Trajectory> trajectories;  // episode-major, then agent
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  std::vector<double> episode_returns;  // undiscounted team return per episode
};

/// Runs whole episodes with actions sampled from the shared policy until at
/// least `n_steps` environment steps are gathered. Deterministic given seed.
Rollout collect(Environment& env, const ParamSet& params, std::size_t n_steps,
                std::uint64_t seed);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Backward GAE recursion:
///   δ_t = r_t + γ V_{t+1} (1 - done_t) - V_t
///   A_t = δ_t + γ λ (1 - done_t) A_{t+1},   returns = A + V.
/// V after the last step is the trajectory's bootstrap value.
GaeResult gae(const Trajectory& trajectory, double gamma, double lambda);

/// Consecutive (k, k+1) steps of one agent within one episode.
struct ReflectivePair {
  std::size_t trajectory = 0;
  std::size_t step = 0;  // k; the successor is step + 1
  double advantage = 0.0;       // A^k
  double advantage_next = 0.0;  // A^{k+1}
};

/// One pair for every non-terminal step that has a successor in the same
/// episode.
std::vector<ReflectivePair> pair_consecutive(std::span<const Trajectory> trajectories,
                                             std::span<const GaeResult> advantages);

struct BatchRecord {
  Transition transition;
  double advantage = 0.0;
  double value_target = 0.0;
  /// Index of the step-(k+1) record when this record heads a reflective pair.
  std::optional<std::size_t> successor;
};

/// Flattened agent-step records for one update.
struct AdvantageBatch {
  std::vector<BatchRecord> records;
  double advantage_mean = 0.0;
  double advantage_std = 0.0;
  bool normalized = false;
  std::size_t pair_count() const;
};

/// Flattens trajectories and links reflective pairs. With `normalize`, the
/// advantages are shifted to zero mean and (when the spread is nonzero)
/// scaled to unit standard deviation over the whole batch.
AdvantageBatch build_batch(std::span<const Trajectory> trajectories,
                           std::span<const GaeResult> advantages, bool normalize);

/// A seeded shuffle of record indices cut into contiguous slices of `size`
/// (the last slice may be shorter). A size larger than the batch yields one
/// full minibatch.
std::vector<std::vector<std::size_t>> minibatches(const AdvantageBatch& batch, std::size_t size,
                                                  std::uint64_t seed);

/// Text dump, one transition per line. Columns:
/// episode,agent,step,action,old_log_prob,reward,value,done,obs,old_distribution,global_state
/// Vector-valued columns are space-separated inside the field.
void write_trajectory_dump(std::ostream& out, std::span<const Trajectory> trajectories);

}  // namespace marpo

#endif  // MARPO_ROLLOUT_HPP_
