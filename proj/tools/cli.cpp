#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "marpo/approximator.hpp"
#include "marpo/env.hpp"
#include "marpo/errors.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/rollout.hpp"
#include "marpo/run_io.hpp"
#include "marpo/trainer.hpp"

namespace marpo::cli {
namespace {

std::string kebab(std::string name) {
  for (char& c : name) {
    if (c == '_') c = '-';
  }
  return name;
}

std::string fixed(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.10f", v);
  return buffer;
}

std::string scientific(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.3e", v);
  return buffer;
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  bool dump_trajectories = false;
  std::map<std::string, std::string> overrides;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  TrainConfig config;
  try {
    if (!args.config_path.empty()) config = load_config(args.config_path);
    if (!args.preset.empty()) {
      auto with_preset = apply_preset(config, args.preset);
      if (!with_preset) throw ValidationError("unknown preset '" + args.preset + "'");
      config = *with_preset;
    }
    for (const auto& key : config_keys()) {
      if (auto it = args.overrides.find(key); it != args.overrides.end()) {
        set_config_value(config, key, it->second);
      }
    }
    validate(config);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::filesystem::path root = "runs";
  if (!args.out_dir.empty()) {
    root = args.out_dir;
  } else if (const char* env_root = std::getenv("MARPO_OUT_DIR"); env_root && *env_root) {
    root = env_root;
  }

  try {
    const std::filesystem::path dir = create_run_directory(root, config.seed);
    {
      std::ofstream cfg(dir / "config.cfg");
      cfg << serialize_config(config);
    }
    std::ofstream metrics(dir / "metrics.csv");
    const RunReport report = train(config);
    write_metrics_csv(metrics, report.rows);
    metrics.close();
    save_checkpoint((dir / "checkpoint.txt").string(), report.params);
    {
      std::ofstream summary(dir / "report.txt");
      summary << "run_id " << report.run_id << '\n'
              << "iterations " << report.rows.size() << '\n'
              << "aborted_iterations " << report.aborted_iterations << '\n'
              << "env_steps " << (report.rows.empty() ? 0 : report.rows.back().env_steps) << '\n'
              << "final_win_rate " << format_metric(report.final_eval.win_rate) << '\n'
              << "final_mean_return " << format_metric(report.final_eval.mean_return) << '\n'
              << "final_mean_discounted_return "
              << format_metric(report.final_eval.mean_discounted_return) << '\n'
              << "wall_time_s " << format_metric(report.wall_time_s) << '\n';
    }
    if (args.dump_trajectories) {
      auto env = make_environment(config.env_name);
      const Rollout rollout = collect(*env, report.params,
                                      std::max(config.rollout_steps, env->spec().max_steps),
                                      mix_seed(config.seed, 0xd0));
      std::ofstream dump(dir / "trajectories.csv");
      write_trajectory_dump(dump, rollout.trajectories);
    }
    out << "run_dir " << dir.string() << '\n'
        << "run_id " << report.run_id << '\n'
        << "win_rate " << format_metric(report.final_eval.win_rate) << '\n'
        << "mean_return " << format_metric(report.final_eval.mean_return) << '\n';
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct EvalArgs {
  std::string checkpoint;
  std::string env_name;
  long long episodes = 100;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  if (args.episodes <= 0) {
    err << "error: --episodes must be at least 1\n";
    return kExitUsage;
  }
  std::unique_ptr<Environment> env;
  ParamSet params;
  try {
    env = make_environment(args.env_name);
    params = load_checkpoint(args.checkpoint);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const EnvSpec& spec = env->spec();
  if (params.policy_shape().input_width() != spec.obs_dim ||
      params.policy_shape().output_width() != spec.action_count) {
    err << "error: checkpoint does not match environment '" << args.env_name << "'\n";
    return kExitUsage;
  }
  try {
    const EvalResult result =
        evaluate(params, *env, static_cast<std::size_t>(args.episodes), args.seed);
    out << "win_rate " << format_metric(result.win_rate) << '\n'
        << "mean_return " << format_metric(result.mean_return) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "evaluation failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct BoundsArgs {
  std::vector<double> targets;
  std::string sweep;
  std::string svg;
};

int cmd_bounds(const BoundsArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<double> targets = args.targets;
  if (!args.sweep.empty()) {
    double from = 0.0, to = 0.0, step = 0.0;
    char tail = 0;
    if (std::sscanf(args.sweep.c_str(), "%lf:%lf:%lf%c", &from, &to, &step, &tail) != 3 ||
        !(step > 0.0) || to < from) {
      err << "error: --sweep expects FROM:TO:STEP with STEP > 0 and TO >= FROM\n";
      return kExitUsage;
    }
    const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) targets.push_back(from + static_cast<double>(i) * step);
  }
  if (targets.empty()) {
    err << "error: give --target or --sweep\n";
    return kExitUsage;
  }
  std::vector<BoundsRow> rows;
  try {
    for (double t : targets) {
      const ClipBounds b = solve_bounds(t);
      rows.push_back({t, b.lower, b.upper});
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  out << "target lower upper residual_lower residual_upper\n";
  for (const BoundsRow& r : rows) {
    out << fixed(r.target) << ' ' << fixed(r.lower) << ' ' << fixed(r.upper) << ' '
        << scientific(std::abs(f_estimator(r.lower) - r.target)) << ' '
        << scientific(std::abs(f_estimator(r.upper) - r.target)) << '\n';
  }
  if (!args.svg.empty()) {
    std::ofstream svg(args.svg);
    if (!svg) {
      err << "error: cannot write " << args.svg << '\n';
      return kExitFailure;
    }
    write_bounds_svg(svg, rows);
  }
  return kExitOk;
}

}  // namespace

void write_bounds_svg(std::ostream& out, const std::vector<BoundsRow>& rows) {
  constexpr double kWidth = 640, kHeight = 420, kMargin = 56;
  double t_max = 0.0, y_min = 1.0, y_max = 1.0;
  for (const BoundsRow& r : rows) {
    t_max = std::max(t_max, r.target);
    y_min = std::min(y_min, r.lower);
    y_max = std::max(y_max, r.upper);
  }
  if (t_max <= 0.0) t_max = 1.0;
  if (y_max - y_min < 1e-9) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  auto px = [&](double t) { return kMargin + (kWidth - 2 * kMargin) * t / t_max; };
  auto py = [&](double y) {
    return kHeight - kMargin - (kHeight - 2 * kMargin) * (y - y_min) / (y_max - y_min);
  };
  auto polyline = [&](const char* color, auto value) {
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const BoundsRow& r : rows) out << px(r.target) << ',' << py(value(r)) << ' ';
    out << "\"/>\n";
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << kMargin << "\" y1=\"" << py(1.0) << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << py(1.0) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  polyline("#1f77b4", [](const BoundsRow& r) { return r.upper; });
  polyline("#d62728", [](const BoundsRow& r) { return r.lower; });
  out << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\">KL target (nats)</text>\n"
      << "  <text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\" text-anchor=\"middle\">ratio bound</text>\n"
      << "  <text x=\"" << kMargin - 6 << "\" y=\"" << py(y_max) + 4
      << "\" text-anchor=\"end\">" << fixed(y_max).substr(0, 5) << "</text>\n"
      << "  <text x=\"" << kMargin - 6 << "\" y=\"" << py(y_min) + 4
      << "\" text-anchor=\"end\">" << fixed(y_min).substr(0, 5) << "</text>\n"
      << "  <text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" text-anchor=\"end\">" << fixed(t_max).substr(0, 5) << "</text>\n"
      << "  <text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 14
      << "\" text-anchor=\"end\" fill=\"#1f77b4\">upper root</text>\n"
      << "  <text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 30
      << "\" text-anchor=\"end\" fill=\"#d62728\">lower root</text>\n"
      << "</svg>\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reflective multi-agent policy optimization on toy cooperative games"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a policy and write a run directory");
  train->add_option("--config", train_args.config_path, "key = value config file");
  train->add_option("--out", train_args.out_dir, "Output root (default $MARPO_OUT_DIR or ./runs)");
  train->add_option("--preset", train_args.preset, "Named (kl_bias, beta) preset: marpo1..marpo4");
  train->add_flag("--dump-trajectories", train_args.dump_trajectories,
                  "Also write trajectories.csv sampled from the final policy");
  std::map<std::string, std::string> raw;
  for (const auto& key : config_keys()) {
    std::string names = "--" + kebab(key);
    if (key == "env_name") names += ",--env";
    train->add_option(names, raw[key], "Overrides config field " + key);
  }

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--env,--env-name", eval_args.env_name, "matrix, commit2 or spread")->required();
  eval->add_option("--episodes", eval_args.episodes, "Number of episodes");
  eval->add_option("--seed", eval_args.seed, "Evaluation seed");

  BoundsArgs bounds_args;
  auto* bounds = app.add_subcommand("bounds", "Solve clipping bounds for KL targets");
  bounds->add_option("--target", bounds_args.targets, "KL target(s) in nats");
  bounds->add_option("--sweep", bounds_args.sweep, "FROM:TO:STEP sweep of targets");
  bounds->add_option("--svg", bounds_args.svg, "Write a chart of the bounds to this file");

  SelftestOptions selftest_options;
  auto* selftest = app.add_subcommand("selftest", "Run the property suite");
  selftest->add_flag("--inject-gradient-fault", selftest_options.inject_gradient_fault,
                     "Corrupt the analytic gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train) {
    for (const auto& key : config_keys()) {
      const auto* opt = train->get_option("--" + kebab(key));
      if (opt->count() > 0) train_args.overrides[key] = raw[key];
    }
    return cmd_train(train_args, out, err);
  }
  if (*eval) return cmd_eval(eval_args, out, err);
  if (*bounds) return cmd_bounds(bounds_args, out, err);
  if (*selftest) return run_selftest(selftest_options, out) ? kExitOk : kExitFailure;
  return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"marpo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace marpo::cli
