#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pesim/geometry.hpp"

namespace pesim {

/// Egocentric spherical grid. Rows index elevation, columns index azimuth.
struct GridConfig {
  int rows = 6;                        ///< elevation cells
  int cols = 120;                      ///< azimuth cells
  double azimuth_min = -kPi;           ///< rad
  double elevation_min = deg2rad(-10.0);
  double azimuth_step = deg2rad(3.0);  ///< rad per column
  double elevation_step = deg2rad(5.0);

  /// Throws std::invalid_argument unless cols span 360 degrees and every size is positive.
  void validate() const;
  std::size_t cells() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

struct GridIndex {
  int row = 0;  ///< v
  int col = 0;  ///< h
  bool operator==(const GridIndex&) const = default;
};

/// Row-major rows x cols map of doubles.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  explicit Grid(const GridConfig& cfg) : Grid(cfg.rows, cfg.cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& at(GridIndex i) { return at(i.row, i.col); }
  double at(GridIndex i) const { return at(i.row, i.col); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Two-channel observation: obstacle proximity and intent heatmap, both rows x cols.
struct PstoTensor {
  Grid lidar;
  Grid intent;
  bool operator==(const PstoTensor&) const = default;
};

struct IntentParams {
  double evader_strength = 1.0;    ///< V_evader
  double teammate_strength = 1.0;  ///< V_teammate
  double evader_decay = 0.9;       ///< lambda_e
  double teammate_decay = 0.9;     ///< lambda_t
  int horizon = 10;                ///< T_future, prediction steps
  double dt = 0.1;                 ///< seconds between prediction steps
  double distance_floor = 0.1;     ///< clamp for the 1/|p| singularity
  std::size_t history_window = 10;

  void validate() const;
};

/// World-frame waypoints for k = 1..horizon (index 0 holds k = 1).
struct Prediction {
  std::vector<Vec3> waypoints;
};

/// Team-shared evader estimate: history of effective positions and the last rollout.
class EvaderTrack {
 public:
  explicit EvaderTrack(std::size_t window = 10) : window_(window == 0 ? 1 : window) {}

  /// Initialises history and prediction with a known position (cold start).
  void seed(const Vec3& position, int horizon);

  void push(const Vec3& position);
  void set_prediction(Prediction p) { last_prediction_ = std::move(p); }

  const std::deque<Vec3>& history() const { return history_; }
  const Prediction& last_prediction() const { return last_prediction_; }
  bool observable_now() const { return observable_now_; }
  void set_observable(bool v) { observable_now_ = v; }
  std::size_t window() const { return window_; }

  /// Current effective position (latest history entry). Throws std::logic_error when empty.
  const Vec3& current() const;

 private:
  std::size_t window_;
  std::deque<Vec3> history_;
  Prediction last_prediction_;
  bool observable_now_ = false;
};

class TrackError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Predictor strategy: (history, horizon, dt) -> waypoints.
using Predictor = std::function<Prediction(const std::deque<Vec3>&, int, double)>;

/// Named predictor strategies. "constant-velocity" and "hold-position" are built in.
class PredictorRegistry {
 public:
  static PredictorRegistry& instance();

  void add(const std::string& name, Predictor p);
  const Predictor& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  PredictorRegistry();
  std::map<std::string, Predictor> predictors_;
};

Prediction constant_velocity_predictor(const std::deque<Vec3>& history, int horizon, double dt);
Prediction hold_position_predictor(const std::deque<Vec3>& history, int horizon, double dt);

/// Quantises a body-frame point into (row, col); nullopt when outside the grid's FOV or zero-norm.
std::optional<GridIndex> project_to_grid(const Vec3& p, const GridConfig& cfg);

/// Per cell r_max minus the nearest range; empty cells are 0.
/// Throws std::invalid_argument for points beyond r_max.
Grid encode_lidar_channel(const PointCloud& cloud, const GridConfig& cfg, double r_max);

/// Observed position when present, otherwise the first waypoint of the previous prediction.
/// The returned position is appended to the track history.
Vec3 effective_evader_position(EvaderTrack& track, const std::optional<Vec3>& observed);

/// Runs the predictor on the track history. Throws TrackError with fewer than two samples.
Prediction predict_evader(const EvaderTrack& track, const Predictor& predictor, int horizon, double dt);

double evader_attraction(const Vec3& p_body, int k, const IntentParams& params);
double teammate_repulsion(const Vec3& p_body, int k, const IntentParams& params);

/// Body-frame point tagged with its prediction step k (0 = current position).
struct StepPoint {
  Vec3 p;
  int k = 0;
};

/// Per-cell maximum of the evader attraction.
Grid encode_evader_channel(std::span<const StepPoint> points, const GridConfig& cfg,
                           const IntentParams& params);

/// Per-cell minimum of the teammate repulsion.
Grid encode_teammate_channel(std::span<const StepPoint> points, const GridConfig& cfg,
                             const IntentParams& params);

/// p + v * k * dt.
Vec3 extrapolate_teammate(const Vec3& position, const Vec3& velocity, int k, double dt);

/// Elementwise sum. Throws std::invalid_argument on shape mismatch.
Grid compose_intent(const Grid& evader, const Grid& teammate);

struct TeammateState {
  Vec3 position;  ///< world
  Vec3 velocity;  ///< world
};

/// Builds both channels for one pursuer. The evader point set is the track's current
/// effective position (k = 0) plus its last prediction (k = 1..horizon).
PstoTensor build_psto(const PointCloud& cloud, const EvaderTrack& track,
                      std::span<const TeammateState> teammates, const AgentPose& ego,
                      const GridConfig& cfg, const IntentParams& params, double r_max);

}  // namespace pesim
