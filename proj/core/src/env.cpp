#include "marpo/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <random>

#include "marpo/errors.hpp"

namespace marpo {
namespace {

void check_joint_action(const EnvSpec& spec, std::span<const std::size_t> joint_action,
                        bool done) {
  if (done) throw ProtocolError("step() called on a finished episode; call reset() first");
  if (joint_action.size() != spec.n_agents) {
    throw ValidationError("joint action must contain one action per agent");
  }
  for (std::size_t a : joint_action) {
    if (a >= spec.action_count) throw ValidationError("action index out of range");
  }
}

void append_one_hot(std::vector<double>& v, std::size_t index, std::size_t size) {
  for (std::size_t i = 0; i < size; ++i) v.push_back(i == index ? 1.0 : 0.0);
}

}  // namespace

// MatrixGame

MatrixGame::MatrixGame() {
  spec_ = EnvSpec{.n_agents = 2, .action_count = 2, .obs_dim = 3, .state_dim = 1,
                  .max_steps = 1, .gamma = 0.99};
}

Observation MatrixGame::reset(std::uint64_t /*seed*/) {
  done_ = false;
  Observation obs;
  for (std::size_t i = 0; i < spec_.n_agents; ++i) {
    std::vector<double> o{1.0};
    append_one_hot(o, i, spec_.n_agents);
    obs.agent_obs.push_back(std::move(o));
  }
  obs.global_state = {1.0};
  return obs;
}

StepResult MatrixGame::step(std::span<const std::size_t> joint_action) {
  check_joint_action(spec_, joint_action, done_);
  done_ = true;
  StepResult result;
  const Observation terminal = reset(0);
  done_ = true;
  result.observations = terminal.agent_obs;
  result.global_state = terminal.global_state;
  result.reward = kPayoff[joint_action[0]][joint_action[1]];
  result.done = true;
  result.success = joint_action[0] == 0 && joint_action[1] == 0;
  return result;
}

std::unique_ptr<Environment> MatrixGame::clone() const {
  return std::make_unique<MatrixGame>(*this);
}

// TwoStepCommit

TwoStepCommit::TwoStepCommit() {
  // Local obs: [phase, committed A, committed B, agent one-hot(2)].
  // State: [phase, agent 0 commit one-hot, agent 1 commit one-hot].
  spec_ = EnvSpec{.n_agents = 2, .action_count = 2, .obs_dim = 5, .state_dim = 5,
                  .max_steps = 2, .gamma = 0.99};
}

Observation TwoStepCommit::observe() const {
  Observation obs;
  obs.global_state = {static_cast<double>(phase_)};
  for (std::size_t i = 0; i < spec_.n_agents; ++i) {
    std::vector<double> o{static_cast<double>(phase_)};
    if (phase_ == 0) {
      o.insert(o.end(), {0.0, 0.0});
      obs.global_state.insert(obs.global_state.end(), {0.0, 0.0});
    } else {
      append_one_hot(o, commits_[i], 2);
      append_one_hot(obs.global_state, commits_[i], 2);
    }
    append_one_hot(o, i, spec_.n_agents);
    obs.agent_obs.push_back(std::move(o));
  }
  return obs;
}

Observation TwoStepCommit::reset(std::uint64_t /*seed*/) {
  phase_ = 0;
  commits_ = {};
  done_ = false;
  return observe();
}

StepResult TwoStepCommit::step(std::span<const std::size_t> joint_action) {
  check_joint_action(spec_, joint_action, done_);
  StepResult result;
  if (phase_ == 0) {
    commits_ = {joint_action[0], joint_action[1]};
    phase_ = 1;
    result.reward = 0.0;
  } else {
    const bool matched = commits_[0] == commits_[1];
    const bool executed = joint_action[0] == 0 && joint_action[1] == 0;
    result.reward = matched && executed ? kSuccessReward : kFailureReward;
    result.success = matched && executed;
    result.done = true;
    done_ = true;
    phase_ = 2;
  }
  const Observation obs = observe();
  result.observations = obs.agent_obs;
  result.global_state = obs.global_state;
  return result;
}

std::unique_ptr<Environment> TwoStepCommit::clone() const {
  return std::make_unique<TwoStepCommit>(*this);
}

// GridSpread

GridSpread::GridSpread(std::size_t grid_size, std::size_t n_agents)
    : grid_size_(grid_size), agents_(n_agents), landmarks_(n_agents) {
  if (grid_size < 2 || n_agents < 1) {
    throw ValidationError("GridSpread: need grid size >= 2 and at least one agent");
  }
  const std::size_t n_landmarks = landmarks_.size();
  spec_.n_agents = n_agents;
  spec_.action_count = 5;
  spec_.obs_dim = 2 + 2 * n_landmarks + 2 * (n_agents - 1) + n_agents;
  spec_.state_dim = 2 * (n_agents + n_landmarks);
  spec_.max_steps = 2 * grid_size;
  spec_.gamma = 0.99;
}

double GridSpread::coverage_distance() const {
  double total = 0.0;
  for (const Cell& l : landmarks_) {
    int nearest = std::numeric_limits<int>::max();
    for (const Cell& a : agents_) {
      nearest = std::min(nearest, std::abs(a.x - l.x) + std::abs(a.y - l.y));
    }
    total += nearest;
  }
  return total;
}

Observation GridSpread::observe() const {
  const double scale = 1.0 / static_cast<double>(grid_size_ - 1);
  Observation obs;
  for (const Cell& a : agents_) {
    obs.global_state.push_back(a.x * scale);
    obs.global_state.push_back(a.y * scale);
  }
  for (const Cell& l : landmarks_) {
    obs.global_state.push_back(l.x * scale);
    obs.global_state.push_back(l.y * scale);
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Cell& self = agents_[i];
    std::vector<double> o{self.x * scale, self.y * scale};
    for (const Cell& l : landmarks_) {
      o.push_back((l.x - self.x) * scale);
      o.push_back((l.y - self.y) * scale);
    }
    for (std::size_t j = 0; j < agents_.size(); ++j) {
      if (j == i) continue;
      o.push_back((agents_[j].x - self.x) * scale);
      o.push_back((agents_[j].y - self.y) * scale);
    }
    append_one_hot(o, i, agents_.size());
    obs.agent_obs.push_back(std::move(o));
  }
  return obs;
}

Observation GridSpread::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto last = static_cast<std::uint64_t>(grid_size_);
  auto draw = [&] {
    return Cell{static_cast<int>(rng() % last), static_cast<int>(rng() % last)};
  };
  for (Cell& l : landmarks_) l = draw();
  for (Cell& a : agents_) a = draw();
  steps_ = 0;
  done_ = false;
  return observe();
}

StepResult GridSpread::step(std::span<const std::size_t> joint_action) {
  check_joint_action(spec_, joint_action, done_);
  static constexpr int kDx[5] = {0, 0, 0, -1, 1};
  static constexpr int kDy[5] = {0, 1, -1, 0, 0};
  const int limit = static_cast<int>(grid_size_) - 1;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Cell& a = agents_[i];
    a.x = std::clamp(a.x + kDx[joint_action[i]], 0, limit);
    a.y = std::clamp(a.y + kDy[joint_action[i]], 0, limit);
  }
  ++steps_;
  StepResult result;
  const double distance = coverage_distance();
  result.reward = -distance;
  result.done = steps_ >= spec_.max_steps;
  result.success = result.done && distance == 0.0;
  done_ = result.done;
  const Observation obs = observe();
  result.observations = obs.agent_obs;
  result.global_state = obs.global_state;
  return result;
}

std::unique_ptr<Environment> GridSpread::clone() const {
  return std::make_unique<GridSpread>(*this);
}

std::unique_ptr<Environment> make_environment(std::string_view name) {
  if (name == "matrix") return std::make_unique<MatrixGame>();
  if (name == "commit2") return std::make_unique<TwoStepCommit>();
  if (name == "spread") return std::make_unique<GridSpread>();
  throw ValidationError("unknown environment '" + std::string(name) +
                        "' (expected matrix, commit2 or spread)");
}

}  // namespace marpo
