#include "marpo/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "marpo/errors.hpp"

namespace marpo {
namespace {

std::size_t sample_action(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    cumulative += probs[a];
    if (u < cumulative) return a;
  }
  // u landed in the rounding gap above the last cumulative mass.
  for (std::size_t a = probs.size(); a-- > 0;) {
    if (probs[a] > 0.0) return a;
  }
  return probs.size() - 1;
}

RowMatrix<double> stack_rows(const std::vector<std::vector<double>>& rows) {
  RowMatrix<double> m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(m.cols())) {
      throw ValidationError("observation rows differ in width");
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(static_cast<Eigen::Index>(r)).data());
  }
  return m;
}

void write_vector(std::ostream& out, const std::vector<double>& v) {
  char buffer[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v[i]);
    if (i) out << ' ';
    out << buffer;
  }
}

}  // namespace

Rollout collect(Environment& env, const ParamSet& params, std::size_t n_steps,
                std::uint64_t seed) {
  const EnvSpec& spec = env.spec();
  if (n_steps < spec.max_steps) {
    throw ValidationError("collect: n_steps must be at least the episode length limit");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Rollout rollout;

  while (rollout.env_steps < n_steps) {
    const std::size_t episode = rollout.episodes;
    const std::size_t first = rollout.trajectories.size();
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      rollout.trajectories.push_back(Trajectory{.episode = episode, .agent_id = i, .steps = {}});
    }
    Observation obs = env.reset(rng());
    double episode_return = 0.0;
    std::vector<std::size_t> joint(spec.n_agents);
    for (std::size_t t = 0;; ++t) {
      const RowMatrix<double> probs = policy_probabilities(params, stack_rows(obs.agent_obs));
      const double value = value_forward(params, obs.global_state);
      for (std::size_t i = 0; i < spec.n_agents; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        std::span<const double> p(probs.row(row).data(), spec.action_count);
        joint[i] = sample_action(p, uniform(rng));
      }
      StepResult result = env.step(joint);
      ++rollout.env_steps;
      episode_return += result.reward;
      for (std::size_t i = 0; i < spec.n_agents; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        Transition tr;
        tr.agent_id = i;
        tr.step_index = t;
        tr.obs = obs.agent_obs[i];
        tr.action = joint[i];
        tr.old_distribution.assign(probs.row(row).data(), probs.row(row).data() + probs.cols());
        tr.old_log_prob = std::log(tr.old_distribution[joint[i]]);
        tr.reward = result.reward;
        tr.value_estimate = value;
        tr.done = result.done;
        tr.global_state = obs.global_state;
        rollout.trajectories[first + i].steps.push_back(std::move(tr));
      }
      obs.agent_obs = std::move(result.observations);
      obs.global_state = std::move(result.global_state);
      if (result.done) break;
      if (t + 1 >= spec.max_steps) {
        // Time limit without a terminal flag: bootstrap from the critic.
        const double bootstrap = value_forward(params, obs.global_state);
        for (std::size_t i = 0; i < spec.n_agents; ++i) {
          rollout.trajectories[first + i].bootstrap_value = bootstrap;
        }
        break;
      }
    }
    rollout.episode_returns.push_back(episode_return);
    ++rollout.episodes;
  }
  return rollout;
}

GaeResult gae(const Trajectory& trajectory, double gamma, double lambda) {
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("gae: gamma and lambda must lie in [0, 1]");
  }
  const auto& steps = trajectory.steps;
  GaeResult result;
  result.advantages.assign(steps.size(), 0.0);
  result.returns.assign(steps.size(), 0.0);
  double next_value = trajectory.bootstrap_value;
  double next_advantage = 0.0;
  for (std::size_t t = steps.size(); t-- > 0;) {
    const Transition& tr = steps[t];
    const double live = tr.done ? 0.0 : 1.0;
    const double delta = tr.reward + gamma * next_value * live - tr.value_estimate;
    const double advantage = delta + gamma * lambda * live * next_advantage;
    result.advantages[t] = advantage;
    result.returns[t] = advantage + tr.value_estimate;
    next_value = tr.value_estimate;
    next_advantage = advantage;
  }
  return result;
}

std::vector<ReflectivePair> pair_consecutive(std::span<const Trajectory> trajectories,
                                             std::span<const GaeResult> advantages) {
  if (trajectories.size() != advantages.size()) {
    throw ValidationError("pair_consecutive: one GAE result per trajectory required");
  }
  std::vector<ReflectivePair> pairs;
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const auto& steps = trajectories[j].steps;
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
      if (steps[k].done) break;
      pairs.push_back(ReflectivePair{.trajectory = j,
                                     .step = k,
                                     .advantage = advantages[j].advantages[k],
                                     .advantage_next = advantages[j].advantages[k + 1]});
    }
  }
  return pairs;
}

std::size_t AdvantageBatch::pair_count() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                [](const BatchRecord& r) { return r.successor.has_value(); }));
}

AdvantageBatch build_batch(std::span<const Trajectory> trajectories,
                           std::span<const GaeResult> advantages, bool normalize) {
  if (trajectories.size() != advantages.size()) {
    throw ValidationError("build_batch: one GAE result per trajectory required");
  }
  AdvantageBatch batch;
  std::vector<std::size_t> first_index(trajectories.size());
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    first_index[j] = batch.records.size();
    const auto& steps = trajectories[j].steps;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      batch.records.push_back(BatchRecord{.transition = steps[k],
                                          .advantage = advantages[j].advantages[k],
                                          .value_target = advantages[j].returns[k],
                                          .successor = std::nullopt});
    }
  }
  for (const ReflectivePair& pair : pair_consecutive(trajectories, advantages)) {
    const std::size_t head = first_index[pair.trajectory] + pair.step;
    batch.records[head].successor = head + 1;
  }
  if (batch.records.empty()) return batch;

  const double n = static_cast<double>(batch.records.size());
  double mean = 0.0;
  for (const auto& r : batch.records) mean += r.advantage;
  mean /= n;
  double variance = 0.0;
  for (const auto& r : batch.records) variance += (r.advantage - mean) * (r.advantage - mean);
  const double std_dev = std::sqrt(variance / n);
  batch.advantage_mean = mean;
  batch.advantage_std = std_dev;
  if (normalize) {
    const double scale = std_dev > 1e-12 ? 1.0 / std_dev : 1.0;
    for (auto& r : batch.records) r.advantage = (r.advantage - mean) * scale;
    batch.normalized = true;
  }
  return batch;
}

std::vector<std::vector<std::size_t>> minibatches(const AdvantageBatch& batch, std::size_t size,
                                                  std::uint64_t seed) {
  if (size == 0) throw ValidationError("minibatches: size must be at least 1");
  std::vector<std::size_t> order(batch.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> slices;
  for (std::size_t begin = 0; begin < order.size(); begin += size) {
    const std::size_t end = std::min(order.size(), begin + size);
    slices.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return slices;
}

void write_trajectory_dump(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << "episode,agent,step,action,old_log_prob,reward,value,done,obs,old_distribution,"
         "global_state\n";
  char buffer[128];
  for (const Trajectory& traj : trajectories) {
    for (const Transition& tr : traj.steps) {
      std::snprintf(buffer, sizeof(buffer), "%zu,%zu,%zu,%zu,%.17g,%.17g,%.17g,%d,", traj.episode,
                    tr.agent_id, tr.step_index, tr.action, tr.old_log_prob, tr.reward,
                    tr.value_estimate, tr.done ? 1 : 0);
      out << buffer;
      write_vector(out, tr.obs);
      out << ',';
      write_vector(out, tr.old_distribution);
      out << ',';
      write_vector(out, tr.global_state);
      out << '\n';
    }
  }
}

}  // namespace marpo
