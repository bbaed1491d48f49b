#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pesim/bridge.hpp"
#include "pesim/episode.hpp"
#include "pesim/policies.hpp"
#include "pesim/rewards.hpp"
#include "pesim/sim.hpp"

namespace pesim {

/// A batch experiment: every combination of policy, team size, evader speed and
/// obstacle count is one cell, each run for `rollouts` seeds base_seed + i.
struct RolloutSpec {
  std::string name = "experiment";
  EpisodeConfig episode;  ///< template; per-cell fields are overwritten
  RewardWeights weights;
  BaselineGains gains;
  BridgeConfig bridge;    ///< used by External cells

  std::vector<PolicyKind> policies{PolicyKind::Apf};
  std::vector<int> team_sizes{2};
  std::vector<double> evader_speeds{0.8};
  std::vector<int> obstacle_counts{0};
  int rollouts = 150;
  std::uint64_t base_seed = 0;
  bool build_psto = false;  ///< build the PSTO even for scripted policies

  /// Throws std::invalid_argument on an empty axis, rollouts < 1 or an invalid episode template.
  void validate() const;
};

struct CellKey {
  PolicyKind policy = PolicyKind::Apf;
  int team_size = 2;
  double evader_speed = 0.8;
  int obstacle_count = 0;
  bool operator==(const CellKey&) const = default;
};

/// Cells in spec order: policy, then team size, then speed, then obstacle count.
std::vector<CellKey> expand_cells(const RolloutSpec& spec);

/// The episode configuration for one rollout of one cell.
EpisodeConfig cell_episode(const RolloutSpec& spec, const CellKey& key, int rollout_index);

struct CellMetrics {
  CellKey key;
  int rollouts = 0;
  int successes = 0;
  int collisions = 0;
  int escapes = 0;
  int timeouts = 0;
  int bridge_faults = 0;
  int harness_faults = 0;
  double sr = 0.0;                ///< successes / completed episodes
  std::optional<double> ct;       ///< mean control cycles to capture, successes only
  double collision_rate = 0.0;
  bool flagged = false;           ///< some episode hit a harness fault

  int completed() const { return rollouts - bridge_faults - harness_faults; }
  bool operator==(const CellMetrics&) const = default;
};

struct MetricsTable {
  std::vector<CellMetrics> cells;
  bool operator==(const MetricsTable&) const = default;
};

/// Reduce for one cell, in the order given. Faulted episodes count in neither SR nor CT.
CellMetrics aggregate_cell(const CellKey& key, std::span<const EpisodeResult> results);

struct RunOptions {
  int jobs = 1;
  std::optional<std::filesystem::path> trajectory_dir;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs every cell. Results do not depend on the worker count.
MetricsTable run_rollouts(const RolloutSpec& spec, const RunOptions& options = {});

/// File name used for a trajectory export, e.g. "APF_n2_v0.8_o0_s17.jsonl".
std::string trajectory_file_name(const CellKey& key, std::uint64_t seed);

enum class TableFormat { Text, Csv };

/// Text: one row per (team size, speed, obstacles) with SR%/CT columns per policy.
/// Csv: one row per cell with every counter; absent CT is "-".
std::string render_table(const MetricsTable& metrics, TableFormat format);

/// Parses the Csv rendering back. Throws std::runtime_error on malformed input.
MetricsTable parse_metrics_csv(const std::string& text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Gain tuning

struct TuneAxis {
  std::string key;  ///< "<section>.<field>", e.g. "apf.attraction_gain"
  std::vector<double> values;
};

struct TuneCandidate {
  std::vector<std::pair<std::string, double>> setting;
  BaselineGains gains;
  CellMetrics metrics;
};

struct TuneResult {
  std::vector<TuneCandidate> candidates;  ///< grid order
  std::size_t best = 0;
};

/// Default search grid for one scripted policy.
std::vector<TuneAxis> default_tune_axes(PolicyKind kind);

/// Exhaustive grid search over the axes for one policy, using the spec's first team size,
/// first evader speed and first obstacle count. Best = highest SR, then lowest CT.
TuneResult tune_gains(const RolloutSpec& spec, PolicyKind kind, const std::vector<TuneAxis>& axes, int jobs,
                      const std::function<void(std::size_t done, std::size_t total)>& progress = {});

}  // namespace pesim
