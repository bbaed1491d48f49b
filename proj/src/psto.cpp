#include "pesim/psto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pesim {

void GridConfig::validate() const {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("grid dimensions must be positive");
  if (!(azimuth_step > 0.0) || !(elevation_step > 0.0)) {
    throw std::invalid_argument("grid angular steps must be positive");
  }
  if (std::abs(cols * azimuth_step - 2.0 * kPi) > 1e-9) {
    throw std::invalid_argument("grid columns must span 360 degrees of azimuth");
  }
}

void IntentParams::validate() const {
  if (!(evader_strength > 0.0) || !(teammate_strength > 0.0)) {
    throw std::invalid_argument("intent strengths must be positive");
  }
  if (!(evader_decay > 0.0 && evader_decay <= 1.0) || !(teammate_decay > 0.0 && teammate_decay <= 1.0)) {
    throw std::invalid_argument("intent decay factors must lie in (0, 1]");
  }
  if (horizon < 0) throw std::invalid_argument("prediction horizon must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("prediction dt must be positive");
  if (!(distance_floor > 0.0)) throw std::invalid_argument("distance floor must be positive");
}

// ---------------------------------------------------------------------------
// Evader track and predictors

void EvaderTrack::seed(const Vec3& position, int horizon) {
  history_.clear();
  history_.push_back(position);
  last_prediction_.waypoints.assign(static_cast<std::size_t>(std::max(horizon, 0)), position);
  observable_now_ = true;
}

void EvaderTrack::push(const Vec3& position) {
  history_.push_back(position);
  while (history_.size() > window_) history_.pop_front();
}

const Vec3& EvaderTrack::current() const {
  if (history_.empty()) throw TrackError("evader track has no history");
  return history_.back();
}

Prediction constant_velocity_predictor(const std::deque<Vec3>& history, int horizon, double dt) {
  if (history.size() < 2) throw TrackError("constant-velocity prediction needs two history samples");
  const Vec3& last = history.back();
  const Vec3 velocity = (last - history[history.size() - 2]) / dt;
  Prediction out;
  out.waypoints.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  for (int k = 1; k <= horizon; ++k) out.waypoints.push_back(last + velocity * (k * dt));
  return out;
}

Prediction hold_position_predictor(const std::deque<Vec3>& history, int horizon, double) {
  if (history.empty()) throw TrackError("hold-position prediction needs a history sample");
  Prediction out;
  out.waypoints.assign(static_cast<std::size_t>(std::max(horizon, 0)), history.back());
  return out;
}

PredictorRegistry::PredictorRegistry() {
  predictors_["constant-velocity"] = constant_velocity_predictor;
  predictors_["hold-position"] = hold_position_predictor;
}

PredictorRegistry& PredictorRegistry::instance() {
  static PredictorRegistry registry;
  return registry;
}

void PredictorRegistry::add(const std::string& name, Predictor p) { predictors_[name] = std::move(p); }

const Predictor& PredictorRegistry::get(const std::string& name) const {
  auto it = predictors_.find(name);
  if (it == predictors_.end()) throw std::invalid_argument("unknown predictor '" + name + "'");
  return it->second;
}

std::vector<std::string> PredictorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : predictors_) out.push_back(name);
  return out;
}

Vec3 effective_evader_position(EvaderTrack& track, const std::optional<Vec3>& observed) {
  Vec3 effective;
  if (observed) {
    effective = *observed;
  } else {
    if (track.last_prediction().waypoints.empty()) {
      throw TrackError("evader unobserved and no prior prediction (seed the track first)");
    }
    effective = track.last_prediction().waypoints.front();
  }
  track.set_observable(observed.has_value());
  track.push(effective);
  return effective;
}

Prediction predict_evader(const EvaderTrack& track, const Predictor& predictor, int horizon, double dt) {
  if (track.history().size() < 2) throw TrackError("evader prediction needs at least two history samples");
  if (horizon <= 0) return {};
  return predictor(track.history(), horizon, dt);
}

// ---------------------------------------------------------------------------
// Projection and channel encoders

std::optional<GridIndex> project_to_grid(const Vec3& p, const GridConfig& cfg) {
  if (!(p.norm() > 0.0)) return std::nullopt;
  const Spherical s = cartesian_to_spherical(p);
  const double hf = std::floor((s.azimuth - cfg.azimuth_min) / cfg.azimuth_step);
  const double vf = std::floor((s.elevation - cfg.elevation_min) / cfg.elevation_step);
  if (hf < 0.0 || hf >= cfg.cols || vf < 0.0 || vf >= cfg.rows) return std::nullopt;
  return GridIndex{static_cast<int>(vf), static_cast<int>(hf)};
}

Grid encode_lidar_channel(const PointCloud& cloud, const GridConfig& cfg, double r_max) {
  // Track the per-cell minimum range, then invert.
  Grid nearest(cfg.rows, cfg.cols, std::numeric_limits<double>::infinity());
  for (const auto& p : cloud.points) {
    const double r = p.norm();
    if (r > r_max) throw std::invalid_argument("lidar point beyond r_max");
    if (auto idx = project_to_grid(p, cfg)) nearest.at(*idx) = std::min(nearest.at(*idx), r);
  }
  Grid out(cfg);
  auto src = nearest.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (std::isfinite(src[i])) dst[i] = r_max - src[i];
  }
  return out;
}

double evader_attraction(const Vec3& p_body, int k, const IntentParams& params) {
  const double d = std::max(p_body.norm(), params.distance_floor);
  return params.evader_strength / d * std::pow(params.evader_decay, k);
}

double teammate_repulsion(const Vec3& p_body, int k, const IntentParams& params) {
  const double d = std::max(p_body.norm(), params.distance_floor);
  return -params.teammate_strength / d * std::pow(params.teammate_decay, k);
}

Grid encode_evader_channel(std::span<const StepPoint> points, const GridConfig& cfg,
                           const IntentParams& params) {
  Grid out(cfg);
  std::vector<bool> hit(cfg.cells(), false);
  for (const auto& sp : points) {
    auto idx = project_to_grid(sp.p, cfg);
    if (!idx) continue;
    const double psi = evader_attraction(sp.p, sp.k, params);
    const std::size_t flat = static_cast<std::size_t>(idx->row) * cfg.cols + idx->col;
    if (!hit[flat] || psi > out.at(*idx)) out.at(*idx) = psi;
    hit[flat] = true;
  }
  return out;
}

Grid encode_teammate_channel(std::span<const StepPoint> points, const GridConfig& cfg,
                             const IntentParams& params) {
  Grid out(cfg);
  std::vector<bool> hit(cfg.cells(), false);
  for (const auto& sp : points) {
    auto idx = project_to_grid(sp.p, cfg);
    if (!idx) continue;
    const double psi = teammate_repulsion(sp.p, sp.k, params);
    const std::size_t flat = static_cast<std::size_t>(idx->row) * cfg.cols + idx->col;
    if (!hit[flat] || psi < out.at(*idx)) out.at(*idx) = psi;
    hit[flat] = true;
  }
  return out;
}

Vec3 extrapolate_teammate(const Vec3& position, const Vec3& velocity, int k, double dt) {
  return position + velocity * (k * dt);
}

Grid compose_intent(const Grid& evader, const Grid& teammate) {
  if (evader.rows() != teammate.rows() || evader.cols() != teammate.cols()) {
    throw std::invalid_argument("intent maps differ in shape");
  }
  Grid out(evader.rows(), evader.cols());
  auto a = evader.data();
  auto b = teammate.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  return out;
}

PstoTensor build_psto(const PointCloud& cloud, const EvaderTrack& track,
                      std::span<const TeammateState> teammates, const AgentPose& ego,
                      const GridConfig& cfg, const IntentParams& params, double r_max) {
  PstoTensor out;
  out.lidar = encode_lidar_channel(cloud, cfg, r_max);

  std::vector<StepPoint> evader_points;
  evader_points.reserve(track.last_prediction().waypoints.size() + 1);
  evader_points.push_back({world_to_body(track.current(), ego), 0});
  int k = 1;
  for (const auto& w : track.last_prediction().waypoints) {
    evader_points.push_back({world_to_body(w, ego), k++});
  }

  std::vector<StepPoint> team_points;
  team_points.reserve(teammates.size() * static_cast<std::size_t>(params.horizon + 1));
  for (const auto& mate : teammates) {
    team_points.push_back({world_to_body(mate.position, ego), 0});
    for (int step = 1; step <= params.horizon; ++step) {
      team_points.push_back(
          {world_to_body(extrapolate_teammate(mate.position, mate.velocity, step, params.dt), ego), step});
    }
  }

  out.intent = compose_intent(encode_evader_channel(evader_points, cfg, params),
                              encode_teammate_channel(team_points, cfg, params));
  return out;
}

}  // namespace pesim
