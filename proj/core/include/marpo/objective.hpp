#ifndef MARPO_OBJECTIVE_HPP_
#define MARPO_OBJECTIVE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "marpo/approximator.hpp"
#include "marpo/losses.hpp"
#include "marpo/rollout.hpp"

namespace marpo {

/// A minibatch laid out for batched network evaluation. Policy rows hold the
/// sampled records first, then the step-(k+1) rows of reflective pairs.
struct ObjectiveBatch {
  struct Pair {
    std::size_t head = 0;           // sample row of step k
    std::size_t successor_row = 0;  // policy row of step k+1
    double advantage_next = 0.0;
  };

  RowMatrix<double> observations;
  std::vector<std::size_t> actions;          // per policy row
  std::vector<double> old_log_probs;         // per policy row
  std::vector<std::vector<double>> old_distributions;  // per sample
  std::vector<double> advantages;            // per sample
  RowMatrix<double> states;                  // per sample
  std::vector<double> value_targets;         // per sample
  std::vector<Pair> pairs;

  std::size_t sample_count() const { return advantages.size(); }
};

/// Gathers `indices` from the batch. Pair successors are pulled in even when
/// they fall in another minibatch; `include_pairs = false` drops them.
ObjectiveBatch assemble_minibatch(const AdvantageBatch& batch,
                                  std::span<const std::size_t> indices,
                                  bool include_pairs = true);

struct ObjectiveSettings {
  Algorithm algorithm = Algorithm::kMarpo;
  LossSettings loss;
  double epsilon = 0.2;  // baseline clip range
  double l2_coef = 0.0;  // adds ½ l2_coef ‖θ‖²
};

/// Current policy distributions at the batch's sample rows.
std::vector<std::vector<double>> current_distributions(const ParamSet& params,
                                                       const ObjectiveBatch& batch);

/// Loss of the minibatch under `params`. When `gradient` is non-empty it
/// receives the exact reverse-mode gradient of `total` (size params.size()).
/// At clip and min kinks the derivative of the active branch is used, with
/// ties going to the unclipped branch.
LossBreakdown evaluate_objective(const ParamSet& params, const ObjectiveBatch& batch,
                                 const ObjectiveSettings& settings,
                                 std::span<double> gradient = {});

/// Forward-only `total` with parameters supplied in an arbitrary precision.
/// Instantiated for double and long double.
template <typename Scalar>
Scalar objective_total(const ParamSet& layout, std::span<const Scalar> flat,
                       const ObjectiveBatch& batch, const ObjectiveSettings& settings);

}  // namespace marpo

#endif  // MARPO_OBJECTIVE_HPP_
