#include "marpo/synthetic.hpp"

#include <cmath>
#include <random>

#include "marpo/errors.hpp"

namespace marpo {

std::vector<double> random_distribution(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> draw(1.0);
  std::vector<double> p(size);
  double total = 0.0;
  for (double& v : p) {
    v = draw(rng) + 1e-3;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

ObjectiveBatch make_synthetic_batch(const ParamSet& params, const SyntheticBatchOptions& o,
                                    std::uint64_t seed) {
  if (o.pairs > o.samples || o.samples == 0) {
    throw ValidationError("make_synthetic_batch: need 0 < samples and pairs <= samples");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ParamSet behaviour = params;
  for (double& v : behaviour.flat()) v += o.policy_drift * normal(rng);

  const std::size_t rows = o.samples + o.pairs;
  ObjectiveBatch mb;
  mb.observations.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(o.obs_dim));
  for (Eigen::Index i = 0; i < mb.observations.size(); ++i) mb.observations.data()[i] = normal(rng);
  const RowMatrix<double> old_probs = policy_probabilities(behaviour, mb.observations);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    double u = uniform(rng);
    std::size_t action = 0;
    while (action + 1 < o.action_count && u >= old_probs(row, static_cast<Eigen::Index>(action))) {
      u -= old_probs(row, static_cast<Eigen::Index>(action));
      ++action;
    }
    mb.actions.push_back(action);
    mb.old_log_probs.push_back(std::log(old_probs(row, static_cast<Eigen::Index>(action))));
    if (r < o.samples) {
      mb.old_distributions.emplace_back(old_probs.row(row).data(),
                                        old_probs.row(row).data() + old_probs.cols());
      mb.advantages.push_back(normal(rng));
      mb.value_targets.push_back(normal(rng));
    }
  }
  mb.states.resize(static_cast<Eigen::Index>(o.samples), static_cast<Eigen::Index>(o.state_dim));
  for (Eigen::Index i = 0; i < mb.states.size(); ++i) mb.states.data()[i] = normal(rng);
  for (std::size_t j = 0; j < o.pairs; ++j) {
    mb.pairs.push_back(ObjectiveBatch::Pair{j, o.samples + j, normal(rng)});
  }
  return mb;
}

}  // namespace marpo
