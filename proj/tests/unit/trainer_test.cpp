#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "marpo/errors.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/run_io.hpp"
#include "marpo/trainer.hpp"

namespace marpo {
namespace {

TrainConfig quick(const std::string& env, std::size_t iterations = 3) {
  TrainConfig c;
  c.env_name = env;
  c.iterations = iterations;
  c.epochs = 2;
  c.rollout_steps = 64;
  c.minibatch_size = 48;
  c.hidden_width = 16;
  c.eval_episodes = 4;
  c.learning_rate = 3e-3;
  c.seed = 5;
  return c;
}

std::string csv(const RunReport& r) {
  std::ostringstream out;
  write_metrics_csv(out, r.rows);
  return out.str();
}

bool same_params(const ParamSet& a, const ParamSet& b) {
  return a.size() == b.size() && std::equal(a.flat().begin(), a.flat().end(), b.flat().begin());
}

TEST(Validate, Defaults) {
  TrainConfig c;
  EXPECT_THROW(validate(c), ValidationError);  // env_name is required
  c.env_name = "matrix";
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.epochs, 5u);
  EXPECT_EQ(c.minibatch_size, 256u);
  EXPECT_EQ(c.learning_rate, 3e-4);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.sigma, 0.01);
  EXPECT_EQ(c.beta, 0.9);
  EXPECT_EQ(c.kl_bias, 0.05);
  EXPECT_EQ(c.baseline_epsilon, 0.2);
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.lambda, 0.95);
}

TEST(Validate, RejectsOutOfRangeFields) {
  const TrainConfig base = quick("matrix");
  auto rejects = [&](auto mutate) {
    TrainConfig c = base;
    mutate(c);
    EXPECT_THROW(validate(c), ValidationError);
  };
  rejects([](TrainConfig& c) { c.iterations = 0; });
  rejects([](TrainConfig& c) { c.epochs = 0; });
  rejects([](TrainConfig& c) { c.minibatch_size = 0; });
  rejects([](TrainConfig& c) { c.rollout_steps = 0; });
  rejects([](TrainConfig& c) { c.alpha = -0.1; });
  rejects([](TrainConfig& c) { c.beta = 1.0; });
  rejects([](TrainConfig& c) { c.beta = -0.1; });
  rejects([](TrainConfig& c) { c.baseline_epsilon = 0.0; });
  rejects([](TrainConfig& c) { c.baseline_epsilon = 1.0; });
  rejects([](TrainConfig& c) { c.gamma = 1.5; });
  rejects([](TrainConfig& c) { c.lambda = -0.5; });
  rejects([](TrainConfig& c) { c.learning_rate = -1.0; });
  rejects([](TrainConfig& c) { c.kl_bias = -0.01; });
  rejects([](TrainConfig& c) { c.eval_episodes = 0; });
  rejects([](TrainConfig& c) { c.eval_interval = 0; });
  rejects([](TrainConfig& c) { c.env_name = "smac"; });
  rejects([](TrainConfig& c) { c.hidden_width = 0; });
}

TEST(Presets, PairsFromSensitivityStudy) {
  const TrainConfig base = quick("commit2");
  const std::vector<std::pair<double, double>> expected{
      {0.05, 0.05}, {0.08, 0.08}, {0.10, 0.08}, {0.10, 0.01}};
  const auto names = preset_names();
  ASSERT_EQ(names, (std::vector<std::string>{"marpo1", "marpo2", "marpo3", "marpo4"}));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto c = apply_preset(base, names[i]);
    ASSERT_TRUE(c.has_value());
    EXPECT_EQ(c->kl_bias, expected[i].first);
    EXPECT_EQ(c->beta, expected[i].second);
    EXPECT_EQ(c->env_name, "commit2");
  }
  EXPECT_FALSE(apply_preset(base, "marpo9").has_value());
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  TrainConfig c = quick("commit2", 1);
  c.epochs = 1;
  c.minibatch_size = 100000;
  c.learning_rate = 0.0;
  std::vector<ParamSet> seen;
  TrainHooks hooks;
  hooks.on_update = [&](const ParamSet& p) { seen.push_back(p); };
  const RunReport r = train(c, hooks);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_TRUE(same_params(seen[0], r.params));
  c.iterations = 1;
  c.learning_rate = 0.0;
  c.epochs = 3;
  std::vector<ParamSet> more;
  hooks.on_update = [&](const ParamSet& p) { more.push_back(p); };
  train(c, hooks);
  ASSERT_EQ(more.size(), 3u);
  EXPECT_TRUE(same_params(more[0], seen[0]));
  EXPECT_TRUE(same_params(more[2], seen[0]));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].iteration, 1u);
  EXPECT_FALSE(r.run_id.empty());
  EXPECT_TRUE(std::isfinite(r.final_eval.mean_return));
}

TEST(Train, FirstMinibatchUsesFlooredTarget) {
  TrainConfig c = quick("commit2", 1);
  c.epochs = 1;
  c.minibatch_size = 100000;
  const RunReport r = train(c);
  ASSERT_EQ(r.rows.size(), 1u);
  const MetricsRow& row = r.rows[0];
  EXPECT_NEAR(row.measured_kl, 0.0, 1e-15);
  EXPECT_EQ(row.target_kl, c.kl_bias);
  const ClipBounds b = solve_bounds(c.kl_bias);
  EXPECT_EQ(row.bound_lower, b.lower);
  EXPECT_EQ(row.bound_upper, b.upper);
  EXPECT_EQ(row.clip_fraction, 0.0);
}

TEST(Train, DeterministicRows) {
  const TrainConfig c = quick("commit2");
  const RunReport a = train(c);
  const RunReport b = train(c);
  EXPECT_EQ(csv(a), csv(b));
  EXPECT_TRUE(same_params(a.params, b.params));
  TrainConfig other = c;
  other.seed = 6;
  EXPECT_NE(csv(a), csv(train(other)));
}

TEST(Train, RowsPerIterationWithIncreasingSteps) {
  const RunReport r = train(quick("spread", 3));
  ASSERT_EQ(r.rows.size(), 3u);
  ASSERT_EQ(r.training_returns.size(), 3u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].iteration, i + 1);
    if (i > 0) EXPECT_GT(r.rows[i].env_steps, r.rows[i - 1].env_steps);
    EXPECT_GE(r.rows[i].target_kl, 0.05);
    EXPECT_LT(r.rows[i].bound_lower, 1.0);
    EXPECT_GT(r.rows[i].bound_upper, 1.0);
    EXPECT_EQ(r.rows[i].wall_time_s, 0.0);
  }
}

TEST(Train, ReflectiveTermActiveOnMultiStepGames) {
  const RunReport r = train(quick("commit2", 2));
  bool nonzero = false;
  for (const auto& row : r.rows) nonzero = nonzero || row.l1 != 0.0;
  EXPECT_TRUE(nonzero);
}

TEST(Train, MappoEqualsReflectiveOffWithFixedBounds) {
  TrainConfig marpo = quick("commit2");
  marpo.alpha = 0.0;
  marpo.clip_mode = ClipMode::kFixed;
  TrainConfig mappo = quick("commit2");
  mappo.algorithm = Algorithm::kMappo;
  std::vector<ParamSet> pa, pb;
  TrainHooks ha, hb;
  ha.on_update = [&](const ParamSet& p) { pa.push_back(p); };
  hb.on_update = [&](const ParamSet& p) { pb.push_back(p); };
  const RunReport a = train(marpo, ha);
  const RunReport b = train(mappo, hb);
  EXPECT_EQ(csv(a), csv(b));
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(same_params(pa[i], pb[i]));
}

TEST(Train, AbortedIterationIsRolledBack) {
  TrainConfig c = quick("commit2", 3);
  TrainHooks hooks;
  hooks.on_loss = [](std::size_t iteration, LossBreakdown& loss) {
    if (iteration == 2) loss.total = std::numeric_limits<double>::quiet_NaN();
  };
  const RunReport r = train(c, hooks);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.aborted_iterations, 1u);
  EXPECT_TRUE(std::isnan(r.rows[1].l0));
  EXPECT_TRUE(std::isnan(r.rows[1].measured_kl));
  EXPECT_TRUE(std::isfinite(r.rows[2].l0));
  EXPECT_GT(r.rows[1].env_steps, r.rows[0].env_steps);
}

TEST(Train, PersistentAbortsFail) {
  TrainConfig c = quick("matrix", 5);
  TrainHooks hooks;
  hooks.on_loss = [](std::size_t, LossBreakdown& loss) {
    loss.total = std::numeric_limits<double>::infinity();
  };
  EXPECT_THROW(train(c, hooks), TrainingError);
}

TEST(Train, RecordsWallTimeWhenAsked) {
  TrainConfig c = quick("matrix", 2);
  c.record_wall_time = true;
  const RunReport r = train(c);
  EXPECT_GT(r.rows.back().wall_time_s, 0.0);
  EXPECT_GE(r.rows.back().wall_time_s, r.rows.front().wall_time_s);
}

ParamSet always_first_action(std::size_t obs_dim, std::size_t state_dim) {
  ParamSet p(NetworkShape({obs_dim, 2}), NetworkShape({state_dim, 1}));
  p.policy_params()[2 * obs_dim] = 50.0;
  return p;
}

TEST(Evaluate, AlwaysZeroZeroWinsMatrixGame) {
  MatrixGame env;
  const EvalResult r = evaluate(always_first_action(3, 1), env, 50, 1);
  EXPECT_EQ(r.win_rate, 1.0);
  EXPECT_EQ(r.mean_return, 1.0);
}

TEST(Evaluate, UniformPolicyWinsAQuarter) {
  MatrixGame env;
  ParamSet p(NetworkShape({3, 2}), NetworkShape({1, 1}));
  const std::size_t n = 10000;
  const EvalResult r = evaluate(p, env, n, 3);
  const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
  EXPECT_NEAR(r.win_rate, 0.25, 3 * sigma);
  EXPECT_EQ(evaluate(p, env, 200, 3).win_rate, evaluate(p, env, 200, 3).win_rate);
}

TEST(Evaluate, OptimalCommitPolicy) {
  TwoStepCommit env;
  const EvalResult r = evaluate(always_first_action(5, 5), env, 20, 1);
  EXPECT_EQ(r.mean_return, 1.0);
  EXPECT_EQ(r.win_rate, 1.0);
  EXPECT_NEAR(r.mean_discounted_return, 0.99, 1e-15);
  EXPECT_THROW(evaluate(always_first_action(5, 5), env, 0, 1), ValidationError);
}

TEST(MixSeed, Spreads) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(7, 9), mix_seed(7, 9));
}

}  // namespace
}  // namespace marpo
