#include "quadnav/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quadnav/checkpoint.hpp"
#include "quadnav/config.hpp"
#include "quadnav/eval.hpp"
#include "quadnav/parallel.hpp"

namespace quadnav {
namespace fs = std::filesystem;
namespace {

const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> header = {
      "iteration",     "env_steps",     "mean_episode_return", "mean_episode_length",
      "goal_reach_rate", "mean_reward_per_step", "episodes_completed", "policy_loss",
      "value_loss",    "entropy",       "clip_fraction",       "approx_kl"};
  return header;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ',';
    out += cells[i];
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string short_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  constexpr double kWidth = 720, kHeight = 450;
  constexpr double kLeft = 90, kRight = 30, kTop = 50, kBottom = 70;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    x_lo = std::min(x_lo, xs[i]);
    x_hi = std::max(x_hi, xs[i]);
    y_lo = std::min(y_lo, ys[i]);
    y_hi = std::max(y_hi, ys[i]);
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
    << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / kTicks;
    const double fy = y_lo + (y_hi - y_lo) * i / kTicks;
    s << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << short_number(fx) << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(fy) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << short_number(fy) << "</text>\n";
    s << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(py(fy)) << "\" x2=\"" << kLeft + pw
      << "\" y2=\"" << fixed(py(fy)) << "\" stroke=\"#dddddd\"/>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 20
    << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label) << "</text>\n";
  s << "<text x=\"20\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 20 " << kTop + ph / 2 << ")\">" << xml_escape(y_label)
    << "</text>\n";

  std::string points;
  std::size_t count = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    if (!points.empty()) points += ' ';
    points += fixed(px(xs[i])) + "," + fixed(py(ys[i]));
    ++count;
  }
  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" << points
    << "\"/>\n";
  if (count == 1) {
    const auto comma = points.find(',');
    s << "<circle cx=\"" << points.substr(0, comma) << "\" cy=\"" << points.substr(comma + 1)
      << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// Thread count for simulation workers; results do not depend on it.
std::size_t worker_threads() {
  try {
    return threads_from_env();
  } catch (const std::exception&) {
    return 1;
  }
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir;
  std::string config_path;
};

// "--section.key value" or "--section.key=value" pairs; top-level keys have no section.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) {
      throw ConfigError("unexpected argument: " + tok);
    }
    const std::string body = tok.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for " + tok);
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

RunConfig build_config(RunConfig base, const GlobalOptions& g,
                       const std::vector<std::string>& extras) {
  if (!g.config_path.empty()) base = load_config(g.config_path);
  for (const auto& [k, v] : parse_overrides(extras)) apply_override(base, k, v);
  if (g.has_seed) base.seed = g.seed;
  if (!g.out_dir.empty()) base.out_dir = g.out_dir;
  validate(base);
  return base;
}

std::string checkpoint_name(std::uint64_t iteration) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "iter_%06llu.ckpt", static_cast<unsigned long long>(iteration));
  return buf;
}

std::string trajectory_name(std::size_t index, std::size_t total) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(total - 1).size()));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "trajectory_%0*zu.csv", width, index);
  return buf;
}

constexpr const char* kTimingHeader = "iteration,wall_clock_s";

std::string timing_row(std::uint64_t iteration, double seconds) {
  return std::to_string(iteration) + "," + format_double(seconds) + "\n";
}

// Drops a trailing partial line left by an interrupted append.
std::string complete_lines(const std::string& text) {
  const auto last = text.rfind('\n');
  return last == std::string::npos ? std::string() : text.substr(0, last + 1);
}

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::app);
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("cannot append to " + path.string());
}

int cmd_train(const GlobalOptions& g, const std::vector<std::string>& extras,
              const std::string& resume_path, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  Checkpoint ckpt;
  const bool resume = !resume_path.empty();
  try {
    if (resume) ckpt = load_checkpoint(resume_path);
    cfg = build_config(resume ? ckpt.config : RunConfig{}, g, extras);
    if (resume && training_config_hash(cfg) != ckpt.config_hash) {
      throw ConfigError("configuration differs from the one stored in " + resume_path);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  // The metrics log gets one appended row per iteration. On resume it is
  // first cut back to the checkpoint's iteration so the continued log matches
  // an uninterrupted run.
  const fs::path dir = cfg.out_dir;
  const fs::path metrics_path = dir / "metrics.csv";
  const fs::path timing_path = dir / "timing.csv";
  double clock_offset = 0.0;
  try {
    write_file_atomic(dir / "config.yaml", render_config(cfg));
    std::vector<TrainMetrics> kept;
    std::string timing = std::string(kTimingHeader) + "\n";
    if (resume && fs::exists(metrics_path)) {
      for (const TrainMetrics& m : parse_metrics_csv(complete_lines(read_file(metrics_path)))) {
        if (m.iteration <= ckpt.iteration) kept.push_back(m);
      }
    }
    if (resume && fs::exists(timing_path)) {
      const CsvTable t = parse_csv(complete_lines(read_file(timing_path)));
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto it = static_cast<std::uint64_t>(t.number(r, 0));
        if (it > ckpt.iteration) continue;
        clock_offset = t.number(r, 1);
        timing += timing_row(it, clock_offset);
      }
    }
    write_file_atomic(metrics_path, metrics_csv(kept));
    write_file_atomic(timing_path, timing);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  auto save = [&](const PpoTrainer& trainer) {
    const std::string bytes = serialize_checkpoint(capture_checkpoint(cfg, trainer));
    write_file_atomic(dir / "checkpoints" / checkpoint_name(trainer.iteration()), bytes);
    write_file_atomic(dir / "latest.ckpt", bytes);
  };

  std::unique_ptr<PpoTrainer> trainer;
  try {
    trainer = std::make_unique<PpoTrainer>(cfg.env, cfg.ppo, cfg.seed, worker_threads());
    if (resume) restore_trainer(*trainer, ckpt);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    bool saved = false;
    while (!trainer->finished()) {
      TrainMetrics m = trainer->iterate();
      m.wall_clock_s = clock_offset +
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      append_text(metrics_path, metrics_csv_row(m));
      append_text(timing_path, timing_row(m.iteration, m.wall_clock_s));
      if (m.iteration % cfg.log_interval == 0 || trainer->finished()) {
        out << "iter " << m.iteration << " env_steps " << m.env_steps << " mean_return "
            << fixed(m.mean_episode_return, 3) << " goal_rate " << fixed(m.goal_reach_rate, 3)
            << " t " << fixed(m.wall_clock_s, 1) << "s\n"
            << std::flush;
      }
      saved = m.iteration % cfg.checkpoint_interval == 0;
      if (saved) save(*trainer);
    }
    if (!saved) save(*trainer);
  } catch (const SimulationDivergence& e) {
    err << "error: simulation diverged in env " << e.env_index() << " at step " << e.step()
        << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const TrainingDivergence& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitDivergence;
  }
  out << "done: " << trainer->env_steps() << " env steps, outputs in " << dir.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::size_t episodes = 0;  // 0: config default
  std::string thrust_noise;
  std::string wind;
  bool wind_random_dir = false;
  bool record = false;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      out.push_back(parse_double(cell));
    } catch (const std::runtime_error&) {
      throw ConfigError(flag + ": not a number: '" + cell + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty value");
  return out;
}

// A single wind magnitude in newtons acts along +x unless the direction is
// randomized per episode.
PerturbationConfig perturbation_from(double noise, double wind, bool random_dir) {
  PerturbationConfig p;
  p.thrust_noise_std = noise;
  p.wind_force = {wind, 0.0, 0.0};
  p.wind_mode = random_dir ? WindMode::kRandomDirection : WindMode::kConstant;
  validate(p);
  return p;
}

struct EvalSetup {
  Checkpoint ckpt;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  fs::path dir;
};

EvalSetup eval_setup(const GlobalOptions& g, const EvalArgs& a) {
  EvalSetup s;
  s.ckpt = load_checkpoint(a.checkpoint);
  const RunConfig& cfg = s.ckpt.config;
  s.seed = g.has_seed ? g.seed : cfg.eval.seed;
  s.episodes = a.episodes > 0 ? a.episodes : cfg.eval.episodes;
  s.dir = g.out_dir.empty() ? fs::path(cfg.out_dir) / "eval" : fs::path(g.out_dir);
  return s;
}

int cmd_eval(const GlobalOptions& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  EvalSetup s;
  PerturbationConfig p;
  bool record = false;
  try {
    s = eval_setup(g, a);
    const EvalDefaults& d = s.ckpt.config.eval;
    p = d.perturbation();
    if (!a.thrust_noise.empty()) p.thrust_noise_std = parse_list(a.thrust_noise, "--thrust-noise").at(0);
    if (!a.wind.empty()) p.wind_force = {parse_list(a.wind, "--wind").at(0), 0.0, 0.0};
    if (a.wind_random_dir) p.wind_mode = WindMode::kRandomDirection;
    validate(p);
    record = a.record || d.record_trajectories;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  EvalReport report;
  try {
    report = evaluate(s.ckpt.config.env, s.ckpt.policy, s.episodes, p, s.seed,
                      {record, worker_threads()});
  } catch (const SimulationDivergence& e) {
    err << "error: simulation diverged in episode " << e.env_index() << ": " << e.what() << "\n";
    return kExitDivergence;
  }
  const std::string summary = eval_summary_text(p, report);
  write_file_atomic(s.dir / "eval_report.csv", eval_report_csv({p}, {report}));
  write_file_atomic(s.dir / "eval_summary.txt", summary);
  for (std::size_t k = 0; k < report.trajectories.size(); ++k) {
    write_file_atomic(s.dir / trajectory_name(k, report.trajectories.size()),
                      trajectory_csv(report.trajectories[k]));
  }
  out << summary;
  return kExitOk;
}

int cmd_sweep(const GlobalOptions& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  EvalSetup s;
  std::vector<PerturbationConfig> grid;
  try {
    s = eval_setup(g, a);
    const auto noises = parse_list(a.thrust_noise.empty() ? "0" : a.thrust_noise, "--thrust-noise");
    const auto winds = parse_list(a.wind.empty() ? "0" : a.wind, "--wind");
    for (double n : noises) {
      for (double w : winds) grid.push_back(perturbation_from(n, w, a.wind_random_dir));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::vector<EvalReport> reports;
  try {
    reports = sweep_perturbations(s.ckpt.config.env, s.ckpt.policy, grid, s.episodes, s.seed,
                                  {false, worker_threads()});
  } catch (const SimulationDivergence& e) {
    err << "error: simulation diverged in episode " << e.env_index() << ": " << e.what() << "\n";
    return kExitDivergence;
  }
  std::string summary;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) summary += "\n";
    summary += eval_summary_text(grid[i], reports[i]);
  }
  write_file_atomic(s.dir / "eval_report.csv", eval_report_csv(grid, reports));
  write_file_atomic(s.dir / "sweep_summary.txt", summary);
  out << summary;
  return kExitOk;
}

int cmd_plot(const GlobalOptions& g, const std::string& input, std::ostream& out,
             std::ostream& err) {
  PlotOutput plot;
  try {
    plot = make_plot(parse_csv(read_file(input)));
  } catch (const std::exception& e) {
    err << "error: " << input << ": " << e.what() << "\n";
    return kExitConfig;
  }
  const fs::path in(input);
  const fs::path dir = g.out_dir.empty() ? in.parent_path() : fs::path(g.out_dir);
  const std::string stem = in.stem().string();
  write_file_atomic(dir / (stem + ".svg"), plot.svg);
  write_file_atomic(dir / (stem + "_plot_data.csv"), plot.data_csv);
  out << "wrote " << (dir / (stem + ".svg")).string() << " (" << plot.kind << ")\n";
  return kExitOk;
}

}  // namespace

std::string metrics_csv_row(const TrainMetrics& m) {
  const auto f = format_double;
  return join({std::to_string(m.iteration), std::to_string(m.env_steps),
               f(m.mean_episode_return), f(m.mean_episode_length), f(m.goal_reach_rate),
               f(m.mean_reward_per_step), std::to_string(m.episodes_completed),
               f(m.policy_loss), f(m.value_loss), f(m.entropy), f(m.clip_fraction),
               f(m.approx_kl)}) +
         "\n";
}

std::string metrics_csv(const std::vector<TrainMetrics>& rows) {
  std::string out = std::string(kMetricsVersionLine) + "\n" + join(metrics_header()) + "\n";
  for (const TrainMetrics& m : rows) out += metrics_csv_row(m);
  return out;
}

std::vector<TrainMetrics> parse_metrics_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header != metrics_header()) throw SchemaError("metrics csv: unexpected header");
  std::vector<TrainMetrics> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TrainMetrics m;
    m.iteration = static_cast<std::uint64_t>(t.number(r, 0));
    m.env_steps = static_cast<std::uint64_t>(t.number(r, 1));
    m.mean_episode_return = t.number(r, 2);
    m.mean_episode_length = t.number(r, 3);
    m.goal_reach_rate = t.number(r, 4);
    m.mean_reward_per_step = t.number(r, 5);
    m.episodes_completed = static_cast<std::uint64_t>(t.number(r, 6));
    m.policy_loss = t.number(r, 7);
    m.value_loss = t.number(r, 8);
    m.entropy = t.number(r, 9);
    m.clip_fraction = t.number(r, 10);
    m.approx_kl = t.number(r, 11);
    rows.push_back(m);
  }
  return rows;
}

PlotOutput make_plot(const CsvTable& table, std::size_t max_points) {
  bool trajectory = table.column("normalized_distance").has_value();
  for (const auto& c : table.comments) {
    if (c.rfind("# quadnav trajectory", 0) == 0) trajectory = true;
    if (c.rfind("# quadnav metrics", 0) == 0) trajectory = false;
  }
  PlotOutput plot;
  plot.kind = trajectory ? "trajectory" : "metrics";
  const std::string x_name = trajectory ? "step" : "env_steps";
  const std::string y_name = trajectory ? "normalized_distance" : "mean_episode_return";
  const auto xc = table.column(x_name);
  if (!xc) throw SchemaError(plot.kind + " csv is missing column " + x_name);
  const auto yc = table.column(y_name);
  if (!yc) throw SchemaError(plot.kind + " csv is missing column " + y_name);
  if (table.rows.empty()) throw SchemaError(plot.kind + " csv has no rows");

  const std::size_t n = table.rows.size();
  const std::size_t m = std::max<std::size_t>(2, max_points);
  std::vector<std::size_t> keep;
  if (n <= m) {
    for (std::size_t i = 0; i < n; ++i) keep.push_back(i);
  } else {
    for (std::size_t k = 0; k < m; ++k) keep.push_back(k * (n - 1) / (m - 1));
  }

  std::vector<double> xs, ys;
  plot.data_csv = x_name + "," + y_name + "\n";
  for (std::size_t i : keep) {
    xs.push_back(table.number(i, *xc));
    ys.push_back(table.number(i, *yc));
    plot.data_csv += table.rows[i][*xc] + "," + table.rows[i][*yc] + "\n";
  }
  plot.svg = trajectory
      ? line_chart("Normalized distance to goal", "control step", "d / d0", xs, ys)
      : line_chart("Mean episodic return during training", "env steps", "mean episode return",
                   xs, ys);
  return plot;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"quadnav: quadrotor navigation simulator, PPO trainer and evaluation harness", "quadnav"};
  app.require_subcommand(1);
  app.allow_extras();
  GlobalOptions g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Training seed (train) or evaluation seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--config", g.config_path, "YAML run configuration");

  std::string resume_path;
  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  train->fallthrough()->allow_extras();
  train->add_option("--resume", resume_path, "Checkpoint to continue from");

  EvalArgs eval_args;
  auto add_eval_flags = [&](CLI::App* sub, bool lists) {
    sub->fallthrough();
    sub->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
    sub->add_option("--episodes", eval_args.episodes, "Number of episodes");
    sub->add_option("--thrust-noise", eval_args.thrust_noise,
                    lists ? "Comma-separated thrust noise std grid" : "Thrust noise std");
    sub->add_option("--wind", eval_args.wind,
                    lists ? "Comma-separated wind magnitude grid, N" : "Wind magnitude, N");
    sub->add_flag("--wind-random-dir", eval_args.wind_random_dir,
                  "Draw a horizontal wind direction per episode");
  };
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the mean action");
  add_eval_flags(eval, false);
  eval->add_flag("--record", eval_args.record, "Write one trajectory CSV per episode");
  auto* sweep = app.add_subcommand("sweep", "Evaluate a checkpoint over a perturbation grid");
  add_eval_flags(sweep, true);

  std::string plot_input;
  auto* plot = app.add_subcommand("plot", "Plot a metrics or trajectory CSV as SVG");
  plot->fallthrough();
  plot->add_option("input", plot_input, "metrics.csv or trajectory CSV")->required();

  auto* print_config = app.add_subcommand("print-config", "Print the effective configuration");
  print_config->fallthrough()->allow_extras();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitConfig;
  }
  g.has_seed = seed_opt->count() > 0;
  // Config overrides arrive as unrecognized options; only train and
  // print-config accept them.
  std::vector<std::string> extras = app.remaining();
  for (const CLI::App* sub : {train, print_config}) {
    for (const auto& x : sub->remaining()) extras.push_back(x);
  }
  if (!extras.empty() && !train->parsed() && !print_config->parsed()) {
    err << "error: unexpected argument: " << extras.front() << "\n";
    return kExitConfig;
  }

  if (train->parsed()) return cmd_train(g, extras, resume_path, out, err);
  if (eval->parsed()) return cmd_eval(g, eval_args, out, err);
  if (sweep->parsed()) return cmd_sweep(g, eval_args, out, err);
  if (plot->parsed()) return cmd_plot(g, plot_input, out, err);
  try {
    out << render_config(build_config(RunConfig{}, g, extras));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace quadnav
