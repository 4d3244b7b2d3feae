#include "marpo/objective.hpp"

#include <cmath>
#include <limits>

#include "marpo/kl_clip.hpp"

namespace marpo {
namespace {

LossSettings effective_settings(const ObjectiveSettings& settings) {
  LossSettings loss = settings.loss;
  if (settings.algorithm == Algorithm::kMappo) {
    loss.bounds = ClipBounds::symmetric(settings.epsilon);
    loss.bounds_next = loss.bounds;
    loss.alpha = 0.0;
    loss.reflective = false;
  }
  return loss;
}

template <typename Scalar>
struct Forward {
  RowMatrix<Scalar> log_probs;  // per policy row
  std::vector<RowMatrix<Scalar>> policy_cache;
  std::vector<RowMatrix<Scalar>> value_cache;
  LossInputs<Scalar> inputs;
};

template <typename Scalar>
Forward<Scalar> run_forward(const ParamSet& layout, std::span<const Scalar> flat,
                            const ObjectiveBatch& batch, bool keep_cache) {
  const std::size_t policy_size = layout.policy_shape().parameter_count();
  const auto policy_params = flat.first(policy_size);
  const auto value_params = flat.subspan(policy_size);

  Forward<Scalar> f;
  const RowMatrix<Scalar> obs = batch.observations.template cast<Scalar>();
  const RowMatrix<Scalar> logits = mlp_forward<Scalar>(
      layout.policy_shape(), policy_params, obs, keep_cache ? &f.policy_cache : nullptr);
  f.log_probs = log_softmax_rows<Scalar>(logits);

  const std::size_t n = batch.sample_count();
  auto& in = f.inputs;
  in.samples.resize(n);
  in.entropies.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    in.samples[i] = PolicySample<Scalar>{f.log_probs(row, static_cast<Eigen::Index>(batch.actions[i])),
                                         static_cast<Scalar>(batch.old_log_probs[i]),
                                         static_cast<Scalar>(batch.advantages[i])};
    Scalar entropy = 0;
    for (Eigen::Index c = 0; c < f.log_probs.cols(); ++c) {
      using std::exp;
      const Scalar lp = f.log_probs(row, c);
      entropy -= exp(lp) * lp;
    }
    in.entropies[i] = entropy;
  }
  in.pairs.reserve(batch.pairs.size());
  for (const auto& pair : batch.pairs) {
    const auto next = static_cast<Eigen::Index>(pair.successor_row);
    in.pairs.push_back(ReflectiveSample<Scalar>{
        in.samples[pair.head].new_log_prob,
        in.samples[pair.head].old_log_prob,
        f.log_probs(next, static_cast<Eigen::Index>(batch.actions[pair.successor_row])),
        static_cast<Scalar>(batch.old_log_probs[pair.successor_row]),
        static_cast<Scalar>(batch.advantages[pair.head]),
        static_cast<Scalar>(pair.advantage_next)});
  }

  const RowMatrix<Scalar> states = batch.states.template cast<Scalar>();
  const RowMatrix<Scalar> values = mlp_forward<Scalar>(layout.value_shape(), value_params, states,
                                                       keep_cache ? &f.value_cache : nullptr);
  in.value_predictions.resize(n);
  in.value_targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.value_predictions[i] = values(static_cast<Eigen::Index>(i), 0);
    in.value_targets[i] = static_cast<Scalar>(batch.value_targets[i]);
  }
  return f;
}

template <typename Scalar>
Scalar squared_norm(std::span<const Scalar> flat) {
  Scalar total = 0;
  for (Scalar v : flat) total += v * v;
  return total;
}

}  // namespace

ObjectiveBatch assemble_minibatch(const AdvantageBatch& batch,
                                  std::span<const std::size_t> indices, bool include_pairs) {
  if (indices.empty()) throw ValidationError("assemble_minibatch: empty minibatch");
  ObjectiveBatch mb;
  const std::size_t n = indices.size();
  std::vector<std::size_t> policy_records(indices.begin(), indices.end());
  for (std::size_t i = 0; i < n; ++i) {
    const BatchRecord& record = batch.records.at(indices[i]);
    if (include_pairs && record.successor) {
      const std::size_t next = *record.successor;
      mb.pairs.push_back(ObjectiveBatch::Pair{i, policy_records.size(),
                                              batch.records.at(next).advantage});
      policy_records.push_back(next);
    }
  }
  const auto& first = batch.records.at(indices[0]).transition;
  mb.observations.resize(static_cast<Eigen::Index>(policy_records.size()),
                         static_cast<Eigen::Index>(first.obs.size()));
  mb.states.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(first.global_state.size()));
  for (std::size_t r = 0; r < policy_records.size(); ++r) {
    const Transition& tr = batch.records.at(policy_records[r]).transition;
    if (tr.obs.size() != first.obs.size()) {
      throw ValidationError("assemble_minibatch: observation widths differ");
    }
    std::copy(tr.obs.begin(), tr.obs.end(), mb.observations.row(static_cast<Eigen::Index>(r)).data());
    mb.actions.push_back(tr.action);
    mb.old_log_probs.push_back(tr.old_log_prob);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const BatchRecord& record = batch.records[indices[i]];
    mb.old_distributions.push_back(record.transition.old_distribution);
    mb.advantages.push_back(record.advantage);
    mb.value_targets.push_back(record.value_target);
    std::copy(record.transition.global_state.begin(), record.transition.global_state.end(),
              mb.states.row(static_cast<Eigen::Index>(i)).data());
  }
  return mb;
}

std::vector<std::vector<double>> current_distributions(const ParamSet& params,
                                                       const ObjectiveBatch& batch) {
  const auto n = static_cast<Eigen::Index>(batch.sample_count());
  const RowMatrix<double> probs = policy_probabilities(params, batch.observations.topRows(n));
  std::vector<std::vector<double>> out(batch.sample_count());
  for (Eigen::Index r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)].assign(probs.row(r).data(), probs.row(r).data() + probs.cols());
  }
  return out;
}

LossBreakdown evaluate_objective(const ParamSet& params, const ObjectiveBatch& batch,
                                 const ObjectiveSettings& settings, std::span<double> gradient) {
  const bool want_grad = !gradient.empty();
  if (want_grad && gradient.size() != params.size()) {
    throw ValidationError("evaluate_objective: gradient buffer has the wrong size");
  }
  const LossSettings loss = effective_settings(settings);
  Forward<double> f = run_forward<double>(params, params.flat(), batch, want_grad);
  LossGradient<double> partials;
  const SurrogateResult<double> result =
      evaluate_surrogate(f.inputs, loss, want_grad ? &partials : nullptr);
  LossBreakdown breakdown = to_breakdown(result);
  if (settings.l2_coef != 0.0) {
    breakdown.total += 0.5 * settings.l2_coef * squared_norm<double>(params.flat());
  }
  {
    std::vector<std::vector<double>> now(batch.sample_count());
    for (std::size_t i = 0; i < now.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      now[i].resize(static_cast<std::size_t>(f.log_probs.cols()));
      for (Eigen::Index c = 0; c < f.log_probs.cols(); ++c) {
        now[i][static_cast<std::size_t>(c)] = std::exp(f.log_probs(row, c));
      }
    }
    try {
      breakdown.measured_kl = measured_kl(batch.old_distributions, now);
    } catch (const std::exception&) {
      breakdown.measured_kl = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (!want_grad) return breakdown;

  std::fill(gradient.begin(), gradient.end(), 0.0);
  // d total / d logits for every policy row.
  const Eigen::Index rows = f.log_probs.rows();
  const Eigen::Index actions = f.log_probs.cols();
  std::vector<double> d_log_prob(static_cast<std::size_t>(rows), 0.0);
  for (std::size_t i = 0; i < batch.sample_count(); ++i) d_log_prob[i] = partials.d_log_prob[i];
  for (std::size_t j = 0; j < batch.pairs.size(); ++j) {
    d_log_prob[batch.pairs[j].head] += partials.d_pair_log_prob[j];
    d_log_prob[batch.pairs[j].successor_row] += partials.d_pair_log_prob_next[j];
  }
  RowMatrix<double> d_logits(rows, actions);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    const double entropy = ru < batch.sample_count() ? f.inputs.entropies[ru] : 0.0;
    const double d_entropy = ru < batch.sample_count() ? partials.d_entropy[ru] : 0.0;
    for (Eigen::Index c = 0; c < actions; ++c) {
      const double lp = f.log_probs(r, c);
      const double p = std::exp(lp);
      const double indicator = static_cast<std::size_t>(c) == batch.actions[ru] ? 1.0 : 0.0;
      // d log p_a / d z_c = 1[c = a] - p_c;  d S / d z_c = -p_c (log p_c + S).
      d_logits(r, c) = d_log_prob[ru] * (indicator - p) + d_entropy * (-p * (lp + entropy));
    }
  }
  const std::size_t policy_size = params.policy_shape().parameter_count();
  mlp_backward(params.policy_shape(), params.policy_params(), f.policy_cache, d_logits,
               gradient.first(policy_size));

  RowMatrix<double> d_values(static_cast<Eigen::Index>(batch.sample_count()), 1);
  for (std::size_t i = 0; i < batch.sample_count(); ++i) {
    d_values(static_cast<Eigen::Index>(i), 0) = partials.d_value_prediction[i];
  }
  mlp_backward(params.value_shape(), params.value_params(), f.value_cache, d_values,
               gradient.subspan(policy_size));

  if (settings.l2_coef != 0.0) {
    const auto theta = params.flat();
    for (std::size_t k = 0; k < gradient.size(); ++k) gradient[k] += settings.l2_coef * theta[k];
  }
  return breakdown;
}

template <typename Scalar>
Scalar objective_total(const ParamSet& layout, std::span<const Scalar> flat,
                       const ObjectiveBatch& batch, const ObjectiveSettings& settings) {
  if (flat.size() != layout.size()) {
    throw ValidationError("objective_total: parameter vector has the wrong size");
  }
  const Forward<Scalar> f = run_forward<Scalar>(layout, flat, batch, false);
  Scalar total = evaluate_surrogate(f.inputs, effective_settings(settings)).total;
  if (settings.l2_coef != 0.0) {
    total += Scalar(0.5) * static_cast<Scalar>(settings.l2_coef) * squared_norm<Scalar>(flat);
  }
  return total;
}

template double objective_total<double>(const ParamSet&, std::span<const double>,
                                        const ObjectiveBatch&, const ObjectiveSettings&);
template long double objective_total<long double>(const ParamSet&, std::span<const long double>,
                                                  const ObjectiveBatch&, const ObjectiveSettings&);

}  // namespace marpo
