#include "pesim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "pesim/config.hpp"
#include "pesim/trajectory.hpp"

namespace pesim {

void RolloutSpec::validate() const {
  if (rollouts < 1) throw std::invalid_argument("rollouts must be at least 1");
  if (policies.empty()) throw std::invalid_argument("no policies listed");
  if (team_sizes.empty()) throw std::invalid_argument("no team sizes listed");
  if (evader_speeds.empty()) throw std::invalid_argument("no evader speeds listed");
  if (obstacle_counts.empty()) throw std::invalid_argument("no obstacle counts listed");
  for (int n : team_sizes) {
    if (n < 1) throw std::invalid_argument("team sizes must be positive");
  }
  for (double v : evader_speeds) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("evader speeds must be finite and >= 0");
  }
  for (int o : obstacle_counts) {
    if (o < 0) throw std::invalid_argument("obstacle counts must be >= 0");
  }
  for (auto k : policies) {
    if (k == PolicyKind::External && bridge.endpoint.empty()) {
      throw std::invalid_argument("external policy needs bridge.endpoint");
    }
  }
  weights.validate();
  cell_episode(*this, {policies.front(), team_sizes.front(), evader_speeds.front(), obstacle_counts.front()}, 0)
      .validate();
}

std::vector<CellKey> expand_cells(const RolloutSpec& spec) {
  std::vector<CellKey> cells;
  for (auto p : spec.policies)
    for (int n : spec.team_sizes)
      for (double v : spec.evader_speeds)
        for (int o : spec.obstacle_counts) cells.push_back({p, n, v, o});
  return cells;
}

EpisodeConfig cell_episode(const RolloutSpec& spec, const CellKey& key, int rollout_index) {
  EpisodeConfig cfg = spec.episode;
  cfg.n_pursuers = key.team_size;
  cfg.evader_speed = key.evader_speed;
  cfg.obstacle_count = key.obstacle_count;
  cfg.seed = spec.base_seed + static_cast<std::uint64_t>(rollout_index);
  return cfg;
}

CellMetrics aggregate_cell(const CellKey& key, std::span<const EpisodeResult> results) {
  CellMetrics m;
  m.key = key;
  m.rollouts = static_cast<int>(results.size());
  double ct_sum = 0.0;
  for (const auto& r : results) {
    if (r.fault == FaultKind::Bridge) {
      ++m.bridge_faults;
      continue;
    }
    if (r.fault == FaultKind::Harness) {
      ++m.harness_faults;
      continue;
    }
    switch (r.outcome.kind) {
      case OutcomeKind::Capture:
        ++m.successes;
        ct_sum += static_cast<double>(r.cycles);
        break;
      case OutcomeKind::Collision: ++m.collisions; break;
      case OutcomeKind::Escape: ++m.escapes; break;
      case OutcomeKind::Timeout: ++m.timeouts; break;
      case OutcomeKind::Running: break;
    }
  }
  const int done = m.completed();
  if (done > 0) {
    m.sr = static_cast<double>(m.successes) / done;
    m.collision_rate = static_cast<double>(m.collisions) / done;
  }
  if (m.successes > 0) m.ct = ct_sum / m.successes;
  m.flagged = m.harness_faults > 0;
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trajectory_file_name(const CellKey& key, std::uint64_t seed) {
  return to_string(key.policy) + "_n" + std::to_string(key.team_size) + "_v" + format_double(key.evader_speed) +
         "_o" + std::to_string(key.obstacle_count) + "_s" + std::to_string(seed) + ".jsonl";
}

namespace {

// Policies live per worker; an external connection is reopened after a fault.
class PolicyCache {
 public:
  explicit PolicyCache(const RolloutSpec& spec) : spec_(spec) {}

  PursuerTeamPolicy& get(PolicyKind kind) {
    auto it = cache_.find(kind);
    if (it != cache_.end()) return *it->second;
    std::unique_ptr<PursuerTeamPolicy> p;
    if (kind == PolicyKind::External) {
      p = std::make_unique<ExternalTeamPolicy>(std::make_unique<BridgeClient>(spec_.bridge),
                                               spec_.episode.pursuer_vmax);
    } else {
      p = make_scripted_policy(kind, spec_.gains);
    }
    return *cache_.emplace(kind, std::move(p)).first->second;
  }

  void drop(PolicyKind kind) { cache_.erase(kind); }

 private:
  const RolloutSpec& spec_;
  std::map<PolicyKind, std::unique_ptr<PursuerTeamPolicy>> cache_;
};

}  // namespace

MetricsTable run_rollouts(const RolloutSpec& spec, const RunOptions& options) {
  spec.validate();
  const auto cells = expand_cells(spec);
  const std::size_t per_cell = static_cast<std::size_t>(spec.rollouts);
  const std::size_t total = cells.size() * per_cell;
  std::vector<EpisodeResult> results(total);

  if (options.trajectory_dir) std::filesystem::create_directories(*options.trajectory_dir);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto worker = [&] {
    PolicyCache policies(spec);
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      const CellKey& key = cells[i / per_cell];
      const EpisodeConfig cfg = cell_episode(spec, key, static_cast<int>(i % per_cell));
      EpisodeResult& out = results[i];
      try {
        PursuerTeamPolicy& policy = policies.get(key.policy);
        TrajectoryLog log;
        log.policy = to_string(key.policy);
        out = run_episode(cfg, spec.weights, spec.gains.evader, policy, options.trajectory_dir ? &log : nullptr,
                          spec.build_psto);
        if (options.trajectory_dir && out.fault == FaultKind::None) {
          export_trajectory(log, *options.trajectory_dir / trajectory_file_name(key, cfg.seed));
        }
      } catch (const BridgeFault& ex) {
        out.fault = FaultKind::Bridge;
        out.fault_message = ex.what();
      } catch (const std::exception& ex) {
        out.fault = FaultKind::Harness;
        out.fault_message = ex.what();
      }
      if (out.fault == FaultKind::Bridge) policies.drop(key.policy);
      const std::size_t d = done.fetch_add(1) + 1;
      if (options.progress) {
        std::lock_guard lock(progress_mu);
        options.progress(d, total);
      }
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MetricsTable table;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    table.cells.push_back(
        aggregate_cell(cells[c], std::span<const EpisodeResult>(results.data() + c * per_cell, per_cell)));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string percent(double sr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * sr);
  return buf;
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

const char* kCsvHeader =
    "policy,team_size,evader_speed,obstacle_count,rollouts,successes,collisions,escapes,timeouts,"
    "bridge_faults,harness_faults,sr,ct,collision_rate";

std::string render_csv(const MetricsTable& m) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& c : m.cells) {
    out += to_string(c.key.policy) + "," + std::to_string(c.key.team_size) + "," + format_double(c.key.evader_speed) +
           "," + std::to_string(c.key.obstacle_count) + "," + std::to_string(c.rollouts) + "," +
           std::to_string(c.successes) + "," + std::to_string(c.collisions) + "," + std::to_string(c.escapes) + "," +
           std::to_string(c.timeouts) + "," + std::to_string(c.bridge_faults) + "," +
           std::to_string(c.harness_faults) + "," + format_double(c.sr) + "," +
           (c.ct ? format_double(*c.ct) : std::string("-")) + "," + format_double(c.collision_rate) + "\n";
  }
  return out;
}

std::string render_text(const MetricsTable& m) {
  std::vector<PolicyKind> policies;
  struct RowKey {
    int n;
    double v;
    int o;
    bool operator==(const RowKey&) const = default;
  };
  std::vector<RowKey> rows;
  for (const auto& c : m.cells) {
    if (std::find(policies.begin(), policies.end(), c.key.policy) == policies.end()) policies.push_back(c.key.policy);
    const RowKey r{c.key.team_size, c.key.evader_speed, c.key.obstacle_count};
    if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
  }

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"N", "Speed", "Obstacles"};
  for (auto p : policies) {
    header.push_back(to_string(p) + " SR");
    header.push_back(to_string(p) + " CT");
  }
  table.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{std::to_string(r.n), format_double(r.v), std::to_string(r.o)};
    for (auto p : policies) {
      const auto it = std::find_if(m.cells.begin(), m.cells.end(), [&](const CellMetrics& c) {
        return c.key.policy == p && c.key.team_size == r.n && c.key.evader_speed == r.v &&
               c.key.obstacle_count == r.o;
      });
      if (it == m.cells.end()) {
        line.insert(line.end(), {"", ""});
        continue;
      }
      std::string sr = percent(it->sr);
      if (it->flagged) sr += "!";
      line.push_back(sr);
      line.push_back(it->ct ? fixed1(*it->ct) : "-");
    }
    table.push_back(line);
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());

  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t i = 0; i < table[r].size(); ++i) {
      if (i) out += "  ";
      out += std::string(width[i] - table[r][i].size(), ' ') + table[r][i];
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string render_table(const MetricsTable& metrics, TableFormat format) {
  return format == TableFormat::Csv ? render_csv(metrics) : render_text(metrics);
}

MetricsTable parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(kCsvHeader)) {
    throw std::runtime_error("metrics CSV header mismatch");
  }
  MetricsTable m;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 14) throw std::runtime_error("metrics CSV row has " + std::to_string(f.size()) + " fields");
    CellMetrics c;
    try {
      c.key.policy = policy_kind_from_string(f[0]);
    } catch (const std::invalid_argument& ex) {
      throw std::runtime_error(ex.what());
    }
    c.key.team_size = parse_int(f[1]);
    c.key.evader_speed = parse_double(f[2]);
    c.key.obstacle_count = parse_int(f[3]);
    c.rollouts = parse_int(f[4]);
    c.successes = parse_int(f[5]);
    c.collisions = parse_int(f[6]);
    c.escapes = parse_int(f[7]);
    c.timeouts = parse_int(f[8]);
    c.bridge_faults = parse_int(f[9]);
    c.harness_faults = parse_int(f[10]);
    c.sr = parse_double(f[11]);
    if (f[12] != "-") c.ct = parse_double(f[12]);
    c.collision_rate = parse_double(f[13]);
    c.flagged = c.harness_faults > 0;
    m.cells.push_back(c);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tuning

std::vector<TuneAxis> default_tune_axes(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Apf:
      return {{"apf.wall_gain", {1.0, 2.0, 3.0, 4.0}},
              {"apf.wall_cutoff", {2.0, 2.5, 3.0}},
              {"apf.teammate_gain", {0.4, 1.5}},
              {"apf.teammate_cutoff", {2.0, 4.0}}};
    case PolicyKind::Angelani:
      return {{"angelani.wall_gain", {2.0, 3.0}},
              {"angelani.wall_cutoff", {2.5, 3.0}},
              {"angelani.alignment_weight", {0.0, 0.3}},
              {"angelani.separation_weight", {0.6, 1.5}},
              {"angelani.separation_radius", {2.0, 4.0}}};
    case PolicyKind::Janosov:
      return {{"janosov.wall_gain", {0.15, 3.0}},
              {"janosov.wall_cutoff", {1.2, 3.0}},
              {"janosov.prediction_cap", {1.0, 2.0, 3.0}}};
    case PolicyKind::External: break;
  }
  throw std::invalid_argument("only scripted policies can be tuned");
}

TuneResult tune_gains(const RolloutSpec& spec, PolicyKind kind, const std::vector<TuneAxis>& axes, int jobs,
                      const std::function<void(std::size_t, std::size_t)>& progress) {
  if (kind == PolicyKind::External) throw std::invalid_argument("only scripted policies can be tuned");
  std::size_t combos = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw std::invalid_argument("tune axis " + a.key + " has no values");
    combos *= a.values.size();
  }

  TuneResult result;
  for (std::size_t c = 0; c < combos; ++c) {
    TuneCandidate cand;
    cand.gains = spec.gains;
    std::size_t rest = c;
    // Last axis varies fastest.
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      idx[a] = rest % axes[a].values.size();
      rest /= axes[a].values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].values[idx[a]];
      set_gain(cand.gains, axes[a].key, v);
      cand.setting.emplace_back(axes[a].key, v);
    }

    RolloutSpec s = spec;
    s.gains = cand.gains;
    s.policies = {kind};
    s.team_sizes = {spec.team_sizes.front()};
    s.evader_speeds = {spec.evader_speeds.front()};
    s.obstacle_counts = {spec.obstacle_counts.front()};
    RunOptions opts;
    opts.jobs = jobs;
    cand.metrics = run_rollouts(s, opts).cells.front();
    result.candidates.push_back(std::move(cand));
    if (progress) progress(c + 1, combos);
  }

  auto better = [](const CellMetrics& a, const CellMetrics& b) {
    if (a.sr != b.sr) return a.sr > b.sr;
    const double ca = a.ct.value_or(std::numeric_limits<double>::infinity());
    const double cb = b.ct.value_or(std::numeric_limits<double>::infinity());
    return ca < cb;
  };
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    if (better(result.candidates[i].metrics, result.candidates[result.best].metrics)) result.best = i;
  }
  return result;
}

}  // namespace pesim
