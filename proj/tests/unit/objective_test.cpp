#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "marpo/env.hpp"
#include "marpo/errors.hpp"
#include "marpo/gradient_check.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/objective.hpp"
#include "marpo/rollout.hpp"
#include "marpo/synthetic.hpp"

namespace marpo {
namespace {

struct CommitData {
  ParamSet params;
  AdvantageBatch batch;
};

CommitData commit_data(std::uint64_t seed) {
  TwoStepCommit env;
  NetworkConfig net;
  net.hidden_width = 16;
  const EnvSpec& s = env.spec();
  ParamSet p = make_params(net, s.obs_dim, s.action_count, s.state_dim, seed);
  const Rollout r = collect(env, p, 60, seed + 1);
  std::vector<GaeResult> gaes;
  for (const auto& t : r.trajectories) gaes.push_back(gae(t, 0.99, 0.95));
  return {p, build_batch(r.trajectories, gaes, true)};
}

TEST(AssembleMinibatch, LayoutAndPairs) {
  const CommitData d = commit_data(3);
  std::vector<std::size_t> idx(d.batch.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  const ObjectiveBatch mb = assemble_minibatch(d.batch, idx);
  const std::size_t n = idx.size();
  EXPECT_EQ(mb.sample_count(), n);
  EXPECT_EQ(mb.pairs.size(), d.batch.pair_count());
  EXPECT_EQ(static_cast<std::size_t>(mb.observations.rows()), n + mb.pairs.size());
  EXPECT_EQ(mb.actions.size(), n + mb.pairs.size());
  EXPECT_EQ(static_cast<std::size_t>(mb.states.rows()), n);
  for (const auto& p : mb.pairs) {
    const BatchRecord& head = d.batch.records[idx[p.head]];
    const BatchRecord& next = d.batch.records[*head.successor];
    EXPECT_EQ(p.advantage_next, next.advantage);
    EXPECT_EQ(mb.actions[p.successor_row], next.transition.action);
    EXPECT_EQ(mb.old_log_probs[p.successor_row], next.transition.old_log_prob);
  }
  EXPECT_TRUE(assemble_minibatch(d.batch, idx, false).pairs.empty());
  EXPECT_THROW(assemble_minibatch(d.batch, std::vector<std::size_t>{}), ValidationError);
}

TEST(AssembleMinibatch, SuccessorOutsideSliceIsPulledIn) {
  const CommitData d = commit_data(4);
  std::size_t head = 0;
  while (!d.batch.records[head].successor) ++head;
  const std::vector<std::size_t> idx{head};
  const ObjectiveBatch mb = assemble_minibatch(d.batch, idx);
  ASSERT_EQ(mb.pairs.size(), 1u);
  EXPECT_EQ(mb.observations.rows(), 2);
}

TEST(EvaluateObjective, UnchangedPolicyHasZeroKlAndUnitRatios) {
  const CommitData d = commit_data(5);
  std::vector<std::size_t> idx(d.batch.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  const ObjectiveBatch mb = assemble_minibatch(d.batch, idx);
  ObjectiveSettings s;
  const LossBreakdown b = evaluate_objective(d.params, mb, s);
  EXPECT_NEAR(b.measured_kl, 0.0, 1e-15);
  EXPECT_NEAR(b.mean_ratio, 1.0, 1e-12);
  EXPECT_EQ(b.clip_fraction, 0.0);
  const auto current = current_distributions(d.params, mb);
  for (std::size_t i = 0; i < current.size(); ++i) {
    for (std::size_t a = 0; a < current[i].size(); ++a) {
      EXPECT_NEAR(current[i][a], mb.old_distributions[i][a], 1e-15);
    }
  }
}

TEST(EvaluateObjective, MeasuredKlMatchesMeanOfPairs) {
  NetworkConfig net;
  net.hidden_width = 16;
  const ParamSet p = make_params(net, 4, 3, 4, 31);
  const ObjectiveBatch mb = make_synthetic_batch(p, {}, 32);
  const LossBreakdown b = evaluate_objective(p, mb, ObjectiveSettings{});
  const auto now = current_distributions(p, mb);
  EXPECT_NEAR(b.measured_kl, measured_kl(mb.old_distributions, now), 1e-15);
  EXPECT_GT(b.measured_kl, 0.0);
}

TEST(EvaluateObjective, MappoIgnoresMarpoSettings) {
  NetworkConfig net;
  net.hidden_width = 16;
  const ParamSet p = make_params(net, 4, 3, 4, 33);
  const ObjectiveBatch mb = make_synthetic_batch(p, {}, 34);
  ObjectiveSettings a;
  a.algorithm = Algorithm::kMappo;
  a.epsilon = 0.2;
  ObjectiveSettings b = a;
  b.loss.alpha = 3.0;
  b.loss.bounds = {0.1, 5.0};
  const LossBreakdown la = evaluate_objective(p, mb, a);
  const LossBreakdown lb = evaluate_objective(p, mb, b);
  EXPECT_EQ(la.total, lb.total);
  EXPECT_EQ(la.l1, 0.0);
}

TEST(EvaluateObjective, GradientOnRolloutBatch) {
  const CommitData d = commit_data(6);
  ParamSet moved = d.params;
  for (std::size_t i = 0; i < moved.size(); ++i) moved.flat()[i] *= 1.0 + 0.5 * std::sin(i * 1.0);
  std::vector<std::size_t> idx(d.batch.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  const ObjectiveBatch mb = assemble_minibatch(d.batch, idx);
  for (auto algorithm : {Algorithm::kMarpo, Algorithm::kMappo}) {
    ObjectiveSettings s;
    s.algorithm = algorithm;
    s.loss.bounds = solve_bounds(0.03);
    s.loss.bounds_next = solve_bounds(0.06);
    std::vector<double> g(moved.size());
    evaluate_objective(moved, mb, s, g);
    const auto report = check_gradient(
        [&](std::span<const long double> x) {
          return objective_total<long double>(moved, x, mb, s);
        },
        moved.flat(), g);
    EXPECT_TRUE(report.passed()) << report.max_relative_error;
  }
}

TEST(EvaluateObjective, ExtendedAndDoubleTotalsAgree) {
  NetworkConfig net;
  net.hidden_width = 16;
  const ParamSet p = make_params(net, 4, 3, 4, 35);
  const ObjectiveBatch mb = make_synthetic_batch(p, {}, 36);
  ObjectiveSettings s;
  const double direct = evaluate_objective(p, mb, s).total;
  std::vector<long double> x(p.flat().begin(), p.flat().end());
  EXPECT_NEAR(objective_total<double>(p, p.flat(), mb, s), direct, 1e-14);
  EXPECT_NEAR(static_cast<double>(objective_total<long double>(p, x, mb, s)), direct, 1e-13);
}

TEST(EvaluateObjective, GradientBufferSize) {
  NetworkConfig net;
  net.hidden_width = 16;
  const ParamSet p = make_params(net, 4, 3, 4, 35);
  const ObjectiveBatch mb = make_synthetic_batch(p, {}, 36);
  std::vector<double> g(3);
  EXPECT_THROW(evaluate_objective(p, mb, ObjectiveSettings{}, g), ValidationError);
}

}  // namespace
}  // namespace marpo
