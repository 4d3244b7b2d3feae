#ifndef MARPO_ENV_HPP_
#define MARPO_ENV_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace marpo {

struct EnvSpec {
  std::size_t n_agents = 1;
  std::size_t action_count = 1;
  std::size_t obs_dim = 1;
  std::size_t state_dim = 1;
  std::size_t max_steps = 1;
  double gamma = 0.99;
};

/// Per-agent local observations plus the global state seen by the critic.
struct Observation {
  std::vector<std::vector<double>> agent_obs;
  std::vector<double> global_state;
};

struct StepResult {
  std::vector<std::vector<double>> observations;
  std::vector<double> global_state;
  double reward = 0.0;  // shared team reward
  bool done = false;
  bool success = false;  // win condition reached on this (final) step
};

/// Cooperative Dec-POMDP with a shared team reward. Local observations end
/// with a one-hot agent index so a shared policy can tell agents apart.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  /// Throws ValidationError for a malformed joint action and ProtocolError
  /// when called after the episode ended.
  virtual StepResult step(std::span<const std::size_t> joint_action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// One-shot two-player coordination game with payoff [[1, 0], [0, 0.5]].
class MatrixGame final : public Environment {
 public:
  MatrixGame();

  std::string name() const override { return "matrix"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(std::span<const std::size_t> joint_action) override;
  std::unique_ptr<Environment> clone() const override;

  static constexpr std::array<std::array<double, 2>, 2> kPayoff{{{1.0, 0.0}, {0.0, 0.5}}};

 private:
  EnvSpec spec_;
  bool done_ = true;
};

/// Two-step game: both agents commit to A (0) or B (1), then each chooses
/// execute (0) or abort (1). The team earns +1 on step two when the commits
/// matched and both executed, -0.1 otherwise; step one pays 0.
class TwoStepCommit final : public Environment {
 public:
  TwoStepCommit();

  std::string name() const override { return "commit2"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(std::span<const std::size_t> joint_action) override;
  std::unique_ptr<Environment> clone() const override;

  static constexpr double kSuccessReward = 1.0;
  static constexpr double kFailureReward = -0.1;

 private:
  Observation observe() const;

  EnvSpec spec_;
  std::size_t phase_ = 0;
  std::array<std::size_t, 2> commits_{};
  bool done_ = true;
};

/// Agents move on an L x L grid (stay, up, down, left, right) and should
/// cover one landmark each. Reward per step is minus the sum over landmarks
/// of the Manhattan distance to the nearest agent. Placement is seeded.
class GridSpread final : public Environment {
 public:
  explicit GridSpread(std::size_t grid_size = 5, std::size_t n_agents = 3);

  std::string name() const override { return "spread"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(std::span<const std::size_t> joint_action) override;
  std::unique_ptr<Environment> clone() const override;

  std::size_t landmark_count() const { return landmarks_.size(); }
  /// Sum over landmarks of the distance to the nearest agent.
  double coverage_distance() const;

 private:
  struct Cell {
    int x = 0;
    int y = 0;
  };
  Observation observe() const;

  EnvSpec spec_;
  std::size_t grid_size_;
  std::vector<Cell> agents_;
  std::vector<Cell> landmarks_;
  std::size_t steps_ = 0;
  bool done_ = true;
};

/// "matrix", "commit2" or "spread". Throws ValidationError for other names.
std::unique_ptr<Environment> make_environment(std::string_view name);

}  // namespace marpo

#endif  // MARPO_ENV_HPP_
