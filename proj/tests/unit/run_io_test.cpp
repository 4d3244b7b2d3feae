#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "marpo/errors.hpp"
#include "marpo/run_io.hpp"

namespace marpo {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(MARPO_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Config, KeysCoverEveryField) {
  EXPECT_EQ(config_keys().size(), 26u);
  const std::set<std::string> unique(config_keys().begin(), config_keys().end());
  EXPECT_EQ(unique.size(), config_keys().size());
}

TEST(Config, RoundTripIsExact) {
  TrainConfig c;
  c.env_name = "spread";
  c.algorithm = Algorithm::kMappo;
  c.learning_rate = 1.0 / 3.0;
  c.kl_bias = 0.1;
  c.beta = 0.08;
  c.seed = 18446744073709551615ULL;
  c.clip_mode = ClipMode::kFixed;
  c.advantage_selection = AdvantageSelection::kCurrent;
  c.optimizer = OptimizerKind::kSgd;
  c.normalize_advantages = false;
  c.record_wall_time = true;
  c.next_target_scale = 0.25;
  const TrainConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, CommentsBlanksAndWhitespace) {
  const TrainConfig c = parse_config(
      "# matrix smoke run\n\n  env_name =  matrix  \nseed=7 # trailing comment\r\n"
      "iterations = 3\n");
  EXPECT_EQ(c.env_name, "matrix");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.iterations, 3u);
  EXPECT_EQ(c.epochs, TrainConfig{}.epochs);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("colour = blue\n"), ValidationError);
  EXPECT_THROW(parse_config("seed 7\n"), ValidationError);
  EXPECT_THROW(parse_config("seed = -7\n"), ValidationError);
  EXPECT_THROW(parse_config("alpha = 0.5x\n"), ValidationError);
  EXPECT_THROW(parse_config("algorithm = ppo\n"), ValidationError);
  EXPECT_THROW(parse_config("normalize_advantages = maybe\n"), ValidationError);
  EXPECT_THROW(parse_config("env_name =\n"), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ValidationError);
}

TEST(Config, SetAndGet) {
  TrainConfig c;
  set_config_value(c, "alpha", "0.25");
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_EQ(get_config_value(c, "alpha"), "0.25");
  EXPECT_THROW(get_config_value(c, "nope"), ValidationError);
}

TEST(RunId, StableAndSensitive) {
  TrainConfig a;
  a.env_name = "matrix";
  TrainConfig b = a;
  EXPECT_EQ(run_id(a), run_id(b));
  EXPECT_EQ(run_id(a).size(), 12u);
  b.seed = 2;
  EXPECT_NE(run_id(a), run_id(b));
}

MetricsRow sample_row(std::size_t i) {
  MetricsRow r;
  r.iteration = i;
  r.env_steps = 512 * i;
  r.mean_return = 0.123456789012 * i;
  r.win_rate = 0.5;
  r.measured_kl = 1e-7 / 3.0;
  r.target_kl = 0.05;
  r.bound_lower = 0.716189455169344;
  r.bound_upper = 1.35040325597722;
  r.clip_fraction = 0.25;
  r.l0 = -0.02;
  r.l1 = 12345.6789;
  r.entropy = std::log(2.0);
  r.value_loss = 3e-12;
  r.wall_time_s = 0.0;
  return r;
}

TEST(MetricsCsv, HeaderOrder) {
  std::ostringstream out;
  write_metrics_csv(out, {});
  EXPECT_EQ(out.str(),
            "iteration,env_steps,mean_return,win_rate,measured_kl,target_kl,bound_lower,"
            "bound_upper,clip_fraction,l0,l1,entropy,value_loss,wall_time_s\n");
}

TEST(MetricsCsv, RoundTripReproducesFormattedValues) {
  std::vector<MetricsRow> rows{sample_row(1), sample_row(2)};
  rows.push_back(MetricsRow{});
  rows.back().iteration = 3;
  rows.back().l0 = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream out;
  write_metrics_csv(out, rows);
  std::istringstream in(out.str());
  const auto back = read_metrics_csv(in);
  ASSERT_EQ(back.size(), rows.size());
  std::ostringstream again;
  write_metrics_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
  EXPECT_EQ(back[0].bound_lower, std::stod(format_metric(rows[0].bound_lower)));
  EXPECT_TRUE(std::isnan(back[2].l0));
}

TEST(MetricsCsv, FormatsNineSignificantDigits) {
  EXPECT_EQ(format_metric(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_metric(1.0), "1");
  EXPECT_EQ(format_metric(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_metric(std::numeric_limits<double>::infinity()), "nan");
}

TEST(MetricsCsv, RejectsMalformed) {
  std::istringstream empty("");
  EXPECT_THROW(read_metrics_csv(empty), ValidationError);
  std::istringstream header("iteration,env_steps\n");
  EXPECT_THROW(read_metrics_csv(header), ValidationError);
  std::ostringstream out;
  write_metrics_csv(out, {});
  std::istringstream short_row(out.str() + "1,2,3\n");
  EXPECT_THROW(read_metrics_csv(short_row), ValidationError);
}

TEST(RunDirectory, NeverReused) {
  const fs::path root = fresh_dir("run_dirs");
  const fs::path a = create_run_directory(root, 7);
  const fs::path b = create_run_directory(root, 7);
  const fs::path c = create_run_directory(root, 7);
  EXPECT_NE(a, b);
  EXPECT_NE(b, c);
  EXPECT_TRUE(fs::is_directory(a) && fs::is_directory(b) && fs::is_directory(c));
  EXPECT_NE(a.filename().string().find("_seed7"), std::string::npos);
}

}  // namespace
}  // namespace marpo
