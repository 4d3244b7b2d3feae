#ifndef MARPO_APPROXIMATOR_HPP_
#define MARPO_APPROXIMATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "marpo/mlp.hpp"

namespace marpo {

struct NetworkConfig {
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 2;
  double hidden_gain = 1.4142135623730951;  // sqrt(2)
  double policy_output_gain = 0.01;
  double value_output_gain = 1.0;
};

/// All learnable parameters: the shared policy network followed by the
/// centralized value network, each stored layer by layer as a row-major
/// weight matrix then a bias vector.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(NetworkShape policy, NetworkShape value);

  const NetworkShape& policy_shape() const { return policy_; }
  const NetworkShape& value_shape() const { return value_; }

  std::size_t size() const { return flat_.size(); }
  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }
  std::span<const double> policy_params() const;
  std::span<const double> value_params() const;
  std::span<double> policy_params();
  std::span<double> value_params();

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  NetworkShape policy_;
  NetworkShape value_;
  std::vector<double> flat_;
};

/// Orthogonally initialized parameters with zero biases. Hidden layers use
/// `hidden_gain`; the output layers use their own gains.
ParamSet make_params(const NetworkConfig& config, std::size_t obs_dim, std::size_t action_count,
                     std::size_t state_dim, std::uint64_t seed);

/// Probability masses over a finite action set. Entries are non-negative and
/// sum to 1 within 1e-9.
class ActionDistribution {
 public:
  explicit ActionDistribution(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t action) const { return probs_[action]; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
};

ActionDistribution policy_forward(const ParamSet& params, std::span<const double> obs);
double value_forward(const ParamSet& params, std::span<const double> global_state);

/// Batched variants: one row per observation/state.
RowMatrix<double> policy_probabilities(const ParamSet& params, const RowMatrix<double>& obs);
Eigen::VectorXd value_batch(const ParamSet& params, const RowMatrix<double>& states);

/// (ln dist[action], -Σ dist ln dist). Throws ValidationError for an
/// out-of-range action.
std::pair<double, double> log_prob_and_entropy(const ActionDistribution& dist,
                                               std::size_t action);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

/// Applies one update in place: plain descent θ -= lr·g, or the Adam rule
/// with bias-corrected moments. Throws NonFiniteGradientError (leaving
/// params and state untouched) if any gradient entry is NaN or infinite.
void sgd_step(ParamSet& params, std::span<const double> grad, double learning_rate,
              OptimizerState& state);

/// Plain-text checkpoint: a version line, both layer-width lists, then every
/// parameter as a hexadecimal float so a write/read round trip is bit-exact.
void write_checkpoint(std::ostream& out, const ParamSet& params);
ParamSet read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParamSet& params);
ParamSet load_checkpoint(const std::string& path);

}  // namespace marpo

#endif  // MARPO_APPROXIMATOR_HPP_
