// pesim: batch runner, golden PSTO encoder, gain tuner and trajectory replay.

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "pesim/config.hpp"
#include "pesim/harness.hpp"
#include "pesim/psto_io.hpp"
#include "pesim/scene.hpp"
#include "pesim/trajectory.hpp"

using namespace pesim;

namespace {

void print_progress(std::size_t done, std::size_t total) {
  if (done == total || done % 50 == 0) std::cerr << "\r" << done << "/" << total << " episodes" << std::flush;
  if (done == total) std::cerr << "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RolloutSpec load_spec(const std::string& config) {
  return config.empty() ? RolloutSpec{} : load_config(config);
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.config, "experiment config (key-value text or .json)");
  cmd->add_option("--seed", c.seed, "base seed override");
  cmd->add_option("--jobs,-j", c.jobs, "worker threads")->check(CLI::Range(1, 1024));
}

int cmd_run(const Common& c, const std::string& out, const std::string& traj_dir, std::optional<int> rollouts,
            const std::string& format, bool quiet) {
  RolloutSpec spec = load_spec(c.config);
  if (c.seed) spec.base_seed = *c.seed;
  if (rollouts) spec.rollouts = *rollouts;
  spec.validate();

  RunOptions opts;
  opts.jobs = c.jobs;
  if (!traj_dir.empty()) opts.trajectory_dir = traj_dir;
  if (!quiet) opts.progress = print_progress;
  const MetricsTable table = run_rollouts(spec, opts);

  write_text(out, render_table(table, TableFormat::Csv));
  std::cout << render_table(table, format == "csv" ? TableFormat::Csv : TableFormat::Text);
  int faults = 0;
  for (const auto& cell : table.cells) faults += cell.bridge_faults + cell.harness_faults;
  if (faults > 0) std::cerr << faults << " episode(s) faulted; see the fault columns in " << out << "\n";
  for (const auto& cell : table.cells) {
    if (cell.flagged) return 3;
  }
  return 0;
}

int cmd_encode(const std::string& scene_path, const std::string& out) {
  const Scene scene = load_scene(scene_path);
  const PstoTensor t = encode_scene(scene);
  write_psto_dump(out, t, {scene.grid.rows, scene.grid.cols, scene.lidar.r_max, scene.intent});
  std::cout << "wrote " << out << " and " << out << ".json\n";
  return 0;
}

std::vector<TuneAxis> parse_axes(const std::vector<std::string>& specs) {
  std::vector<TuneAxis> axes;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--axis expects <section>.<field>=v1,v2,...");
    TuneAxis a{s.substr(0, eq), {}};
    std::stringstream ss(s.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) a.values.push_back(std::stod(item));
    axes.push_back(std::move(a));
  }
  return axes;
}

int cmd_tune(const Common& c, const std::vector<std::string>& policies, std::optional<int> rollouts,
             const std::vector<std::string>& axis_specs, const std::string& out) {
  RolloutSpec spec = load_spec(c.config);
  if (c.seed) spec.base_seed = *c.seed;
  if (rollouts) spec.rollouts = *rollouts;
  if (c.config.empty()) spec.evader_speeds = {0.8};

  BaselineGains tuned = spec.gains;
  for (const auto& name : policies) {
    const PolicyKind kind = policy_kind_from_string(name);
    auto axes = parse_axes(axis_specs);
    if (axes.empty()) axes = default_tune_axes(kind);
    std::cerr << "tuning " << to_string(kind) << "\n";
    const TuneResult res = tune_gains(spec, kind, axes, c.jobs, [](std::size_t d, std::size_t t) {
      std::cerr << "\r" << d << "/" << t << " settings" << std::flush;
      if (d == t) std::cerr << "\n";
    });
    for (const auto& cand : res.candidates) {
      for (const auto& [k, v] : cand.setting) std::cout << k << "=" << format_double(v) << " ";
      std::cout << "SR=" << format_double(cand.metrics.sr)
                << " CT=" << (cand.metrics.ct ? format_double(*cand.metrics.ct) : "-") << "\n";
    }
    const auto& best = res.candidates[res.best];
    std::cout << "best " << to_string(kind) << ":";
    for (const auto& [k, v] : best.setting) {
      std::cout << " " << k << "=" << format_double(v);
      set_gain(tuned, k, v);
    }
    std::cout << "\n";
  }
  if (!out.empty()) {
    spec.gains = tuned;
    write_text(out, spec_to_text(spec));
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_replay(const std::string& path, const std::string& csv_out) {
  const TrajectoryLog log = import_trajectory(path);
  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& r : log.records) {
    for (const auto& p : r.pursuers) min_d = std::min(min_d, (p.position - r.evader.position).norm());
  }
  std::cout << "policy      " << log.policy << "\n"
            << "seed        " << log.seed << "\n"
            << "pursuers    " << log.n_pursuers << "\n"
            << "evader      " << format_double(log.evader_speed) << " m/s\n"
            << "obstacles   " << log.obstacle_count << "\n"
            << "cycles      " << log.records.size() << "\n"
            << "outcome     " << (log.records.empty() ? "none" : to_string(log.records.back().outcome.kind)) << "\n"
            << "min dist    " << (log.records.empty() ? "-" : format_double(min_d)) << " m\n";
  if (!csv_out.empty()) {
    std::string csv = "tick,agent,x,y,vx,vy,yaw\n";
    for (const auto& r : log.records) {
      auto row = [&](const std::string& agent, const AgentSnapshot& s) {
        csv += std::to_string(r.tick) + "," + agent + "," + format_double(s.position.x) + "," +
               format_double(s.position.y) + "," + format_double(s.velocity.x) + "," + format_double(s.velocity.y) +
               "," + format_double(s.yaw) + "\n";
      };
      for (std::size_t i = 0; i < r.pursuers.size(); ++i) row("p" + std::to_string(i), r.pursuers[i]);
      row("evader", r.evader);
    }
    write_text(csv_out, csv);
    std::cout << "wrote " << csv_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent pursuit-evasion simulator and experiment harness"};
  app.require_subcommand(1);

  Common run_common;
  std::string run_out = "metrics.csv";
  std::string run_traj;
  std::optional<int> run_rollouts;
  std::string run_format = "text";
  bool run_quiet = false;
  auto* run = app.add_subcommand("run", "run every cell of an experiment config and write metrics");
  add_common(run, run_common);
  run->add_option("--out,-o", run_out, "metrics CSV path");
  run->add_option("--trajectories", run_traj, "directory for per-episode JSON-lines trajectories");
  run->add_option("--rollouts", run_rollouts, "rollouts per cell override")->check(CLI::PositiveNumber);
  run->add_option("--format", run_format, "stdout table format")->check(CLI::IsMember({"text", "csv"}));
  run->add_flag("--quiet,-q", run_quiet, "no progress output");

  std::string scene_path;
  std::string encode_out;
  auto* encode = app.add_subcommand("encode", "encode a scene file into a golden PSTO dump");
  encode->add_option("--scene", scene_path, "scene JSON")->required();
  encode->add_option("--out,-o", encode_out, "output .bin path")->required();

  Common tune_common;
  std::vector<std::string> tune_policies{"APF", "Angelani", "Janosov"};
  std::optional<int> tune_rollouts;
  std::string tune_out;
  std::vector<std::string> tune_axes;
  auto* tune = app.add_subcommand("tune", "grid-search baseline gains (evader 0.8 m/s, open arena by default)");
  add_common(tune, tune_common);
  tune->add_option("--policy,-p", tune_policies, "policies to tune");
  tune->add_option("--rollouts", tune_rollouts, "rollouts per setting")->check(CLI::PositiveNumber);
  tune->add_option("--out,-o", tune_out, "write the config with the best gains");
  tune->add_option("--axis", tune_axes, "search axis <section>.<field>=v1,v2,... (repeatable)");

  std::string replay_path;
  std::string replay_csv;
  auto* replay = app.add_subcommand("replay", "summarise a trajectory file and export plot data");
  replay->add_option("trajectory", replay_path, "JSON-lines trajectory")->required();
  replay->add_option("--csv", replay_csv, "write per-agent positions as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_common, run_out, run_traj, run_rollouts, run_format, run_quiet);
    if (*encode) return cmd_encode(scene_path, encode_out);
    if (*tune) return cmd_tune(tune_common, tune_policies, tune_rollouts, tune_axes, tune_out);
    if (*replay) return cmd_replay(replay_path, replay_csv);
  } catch (const ConfigError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
