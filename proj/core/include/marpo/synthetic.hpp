#ifndef MARPO_SYNTHETIC_HPP_
#define MARPO_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "marpo/approximator.hpp"
#include "marpo/objective.hpp"

namespace marpo {

/// Random minibatches for property and gradient checks.
struct SyntheticBatchOptions {
  std::size_t obs_dim = 4;
  std::size_t state_dim = 4;
  std::size_t action_count = 3;
  std::size_t samples = 24;
  std::size_t pairs = 8;  // at most `samples`
  /// Scale of the parameter noise separating the behaviour policy from the
  /// current one; larger values push more ratios outside the clip range.
  double policy_drift = 0.3;
};

/// A batch whose stored ("old") distributions come from a perturbed copy of
/// `params`, so ratios under `params` scatter around 1.
ObjectiveBatch make_synthetic_batch(const ParamSet& params, const SyntheticBatchOptions& options,
                                    std::uint64_t seed);

/// Random probability vector with strictly positive entries.
std::vector<double> random_distribution(std::size_t size, std::uint64_t seed);

}  // namespace marpo

#endif  // MARPO_SYNTHETIC_HPP_
