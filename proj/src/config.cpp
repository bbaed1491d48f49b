#include "pesim/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace pesim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Key-value text

namespace {

class KvParser {
 public:
  KvParser(std::string_view text, int line) : s_(text), line_(line) {}

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    return scalar();
  }

  void expect_end() {
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected text after value");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  json basic_string() {
    std::size_t end = pos_ + 1;
    while (end < s_.size() && s_[end] != '"') end += s_[end] == '\\' ? 2 : 1;
    if (end >= s_.size()) fail("unterminated string");
    try {
      json v = json::parse(s_.substr(pos_, end - pos_ + 1));
      pos_ = end + 1;
      return v;
    } catch (const json::exception&) {
      fail("bad string escape");
    }
  }

  json literal_string() {
    const auto end = s_.find('\'', pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    json v = std::string(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return v;
  }

  json array() {
    ++pos_;
    json arr = json::array();
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
      } else if (pos_ >= s_.size() || s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end]))) {
      ++end;
    }
    const std::string tok(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (tok == "true") return true;
    if (tok == "false") return false;
    bool integral = !tok.empty();
    for (std::size_t i = 0; i < tok.size(); ++i) {
      const char c = tok[i];
      if (!(std::isdigit(static_cast<unsigned char>(c)) || (i == 0 && (c == '-' || c == '+')))) integral = false;
    }
    if (integral && tok != "-" && tok != "+") {
      errno = 0;
      char* stop = nullptr;
      if (tok[0] == '-') {
        const long long v = std::strtoll(tok.c_str(), &stop, 10);
        if (errno == 0 && *stop == '\0') return v;
      } else {
        const unsigned long long v = std::strtoull(tok.c_str(), &stop, 10);
        if (errno == 0 && *stop == '\0') return v;
      }
      fail("integer out of range: " + tok);
    }
    char* stop = nullptr;
    const double v = std::strtod(tok.c_str(), &stop);
    if (tok.empty() || *stop != '\0') fail("cannot parse value '" + tok + "'");
    return v;
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

}  // namespace

json parse_kv_text(const std::string& text) {
  json root = json::object();
  json* section = &root;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ConfigError("line " + std::to_string(lineno) + ": bad section name");
      if (root.contains(name)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate section [" + name + "]");
      root[name] = json::object();
      section = &root[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError("line " + std::to_string(lineno) + ": bad key '" + key + "'");
    if (section->contains(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    const int start = lineno;
    // Arrays may continue over several lines.
    while (bracket_balance(value) > 0 && std::getline(in, raw)) {
      ++lineno;
      value += " " + trim(strip_comment(raw));
    }
    KvParser p(value, start);
    (*section)[key] = p.value();
    p.expect_end();
  }
  return root;
}

// ---------------------------------------------------------------------------
// Field binding

namespace {

double as_double(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError(where + ": expected a number");
}

long long as_integer(const json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  throw ConfigError(where + ": expected an integer");
}

void assign(const json& v, double& out, const std::string& where) { out = as_double(v, where); }
void assign(const json& v, int& out, const std::string& where) { out = static_cast<int>(as_integer(v, where)); }
void assign(const json& v, std::uint64_t& out, const std::string& where) {
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return;
  }
  const long long n = as_integer(v, where);
  if (n < 0) throw ConfigError(where + ": must be non-negative");
  out = static_cast<std::uint64_t>(n);
}
void assign(const json& v, bool& out, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
  out = v.get<bool>();
}
void assign(const json& v, std::string& out, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  out = v.get<std::string>();
}
template <class T>
void assign(const json& v, std::vector<T>& out, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<T> tmp;
  for (const auto& e : v) {
    T x{};
    assign(e, x, where);
    tmp.push_back(std::move(x));
  }
  out = std::move(tmp);
}

json to_json_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}
template <class T>
json to_json_value(const T& v) {
  return v;
}
json to_json_value(const std::vector<double>& v) {
  json arr = json::array();
  for (double d : v) arr.push_back(to_json_value(d));
  return arr;
}

struct Reader {
  const json& obj;
  std::string section;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& out) {
    seen.insert(key);
    const auto it = obj.find(key);
    if (it != obj.end()) assign(*it, out, section + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : obj.items()) {
      if (!seen.count(k)) throw ConfigError("unknown key '" + section + "." + k + "'");
    }
  }
};

struct Writer {
  json& obj;
  template <class T>
  void operator()(const char* key, T& v) {
    obj[key] = to_json_value(v);
  }
};

std::string clearance_name(ClearanceSource c) {
  return c == ClearanceSource::LidarMinimum ? "lidar-minimum" : "true-geometry";
}

ClearanceSource clearance_from_name(const std::string& s) {
  if (s == "true-geometry") return ClearanceSource::TrueGeometry;
  if (s == "lidar-minimum") return ClearanceSource::LidarMinimum;
  throw ConfigError("rewards.clearance_source must be 'true-geometry' or 'lidar-minimum'");
}

const std::vector<std::string> kSections = {"experiment", "episode", "lidar", "grid", "intent", "rewards",
                                            "apf", "angelani", "janosov", "evader", "bridge"};

template <class F>
void visit_gains(const std::string& section, BaselineGains& g, F& f) {
  if (section == "apf") {
    auto& p = g.apf;
    f("attraction_gain", p.attraction_gain);
    f("obstacle_gain", p.obstacle_gain);
    f("obstacle_cutoff", p.obstacle_cutoff);
    f("wall_gain", p.wall_gain);
    f("wall_cutoff", p.wall_cutoff);
    f("teammate_gain", p.teammate_gain);
    f("teammate_cutoff", p.teammate_cutoff);
    f("saturation", p.saturation);
  } else if (section == "angelani") {
    auto& p = g.angelani;
    f("target_weight", p.target_weight);
    f("alignment_weight", p.alignment_weight);
    f("separation_weight", p.separation_weight);
    f("separation_radius", p.separation_radius);
    f("neighbor_radius", p.neighbor_radius);
    f("obstacle_gain", p.obstacle_gain);
    f("obstacle_cutoff", p.obstacle_cutoff);
    f("wall_gain", p.wall_gain);
    f("wall_cutoff", p.wall_cutoff);
  } else if (section == "janosov") {
    auto& p = g.janosov;
    f("prediction_cap", p.prediction_cap);
    f("damping", p.damping);
    f("obstacle_gain", p.obstacle_gain);
    f("obstacle_cutoff", p.obstacle_cutoff);
    f("wall_gain", p.wall_gain);
    f("wall_cutoff", p.wall_cutoff);
    f("teammate_gain", p.teammate_gain);
    f("teammate_cutoff", p.teammate_cutoff);
  } else if (section == "evader") {
    auto& p = g.evader;
    f("pursuer_gain", p.pursuer_gain);
    f("wall_gain", p.wall_gain);
    f("wall_cutoff", p.wall_cutoff);
    f("obstacle_gain", p.obstacle_gain);
    f("obstacle_cutoff", p.obstacle_cutoff);
    f("tangential_gain", p.tangential_gain);
    f("tangential_band", p.tangential_band);
    f("hysteresis", p.hysteresis);
    f("wall_guard", p.wall_guard);
  }
}

template <class F>
void visit_section(const std::string& section, RolloutSpec& s, F& f) {
  if (section == "experiment") {
    std::vector<std::string> policies;
    for (auto k : s.policies) policies.push_back(to_string(k));
    f("name", s.name);
    f("rollouts", s.rollouts);
    f("base_seed", s.base_seed);
    f("policies", policies);
    f("team_sizes", s.team_sizes);
    f("evader_speeds", s.evader_speeds);
    f("obstacle_counts", s.obstacle_counts);
    f("build_psto", s.build_psto);
    s.policies.clear();
    for (const auto& p : policies) s.policies.push_back(policy_kind_from_string(p));
  } else if (section == "episode") {
    auto& e = s.episode;
    f("pursuer_vmax", e.pursuer_vmax);
    f("d_cap", e.d_cap);
    f("t_max", e.t_max);
    f("control_hz", e.control_hz);
    f("physics_hz", e.physics_hz);
    f("escape_dist", e.escape_dist);
    f("arena_radius", e.arena_radius);
    f("obstacle_half_extent", e.obstacle_half_extent);
    f("altitude", e.altitude);
    f("spawn_behind", e.spawn_behind);
    f("spawn_spacing", e.spawn_spacing);
    f("tau", e.tau);
    f("agent_radius", e.agent_radius);
    f("teammate_collision_dist", e.teammate_collision_dist);
    f("obstacle_spawn_clearance", e.obstacle_spawn_clearance);
    f("spawn_retries", e.spawn_retries);
    f("predictor", e.predictor);
  } else if (section == "lidar") {
    auto& l = s.episode.lidar;
    f("r_max", l.r_max);
    f("azimuth_samples", l.azimuth_samples);
    f("horizontal_fov_deg", l.horizontal_fov_deg);
    f("vertical_fov_min_deg", l.vertical_fov_min_deg);
    f("vertical_fov_max_deg", l.vertical_fov_max_deg);
    f("elevations_deg", l.elevations_deg);
    f("range_noise_sigma", l.range_noise_sigma);
  } else if (section == "grid") {
    auto& g = s.episode.grid;
    double az_min = rad2deg(g.azimuth_min);
    double el_min = rad2deg(g.elevation_min);
    double az_step = rad2deg(g.azimuth_step);
    double el_step = rad2deg(g.elevation_step);
    f("rows", g.rows);
    f("cols", g.cols);
    f("azimuth_min_deg", az_min);
    f("elevation_min_deg", el_min);
    f("azimuth_step_deg", az_step);
    f("elevation_step_deg", el_step);
    g.azimuth_min = deg2rad(az_min);
    g.elevation_min = deg2rad(el_min);
    g.azimuth_step = deg2rad(az_step);
    g.elevation_step = deg2rad(el_step);
  } else if (section == "intent") {
    auto& i = s.episode.intent;
    f("V_evader", i.evader_strength);
    f("V_teammate", i.teammate_strength);
    f("lambda_e", i.evader_decay);
    f("lambda_t", i.teammate_decay);
    f("T_future", i.horizon);
    f("dt", i.dt);
    f("distance_floor", i.distance_floor);
    f("history_window", i.history_window);
  } else if (section == "rewards") {
    auto& w = s.weights;
    std::string source = clearance_name(w.clearance_source);
    f("w_purs", w.w_purs);
    f("w_coord", w.w_coord);
    f("w_form", w.w_form);
    f("w_obs", w.w_obs);
    f("w_time", w.w_time);
    f("d_des", w.d_des);
    f("sigma_coord", w.sigma_coord);
    f("d_safety", w.d_safety);
    f("r_cap", w.r_cap);
    f("r_coll", w.r_coll);
    f("r_esc", w.r_esc);
    f("r_out", w.r_out);
    f("clearance_source", source);
    w.clearance_source = clearance_from_name(source);
  } else if (section == "bridge") {
    auto& b = s.bridge;
    std::string payload = to_string(b.payload);
    long long deadline = b.deadline.count();
    long long handshake = b.handshake_deadline.count();
    int deadline_ms = static_cast<int>(deadline);
    int handshake_ms = static_cast<int>(handshake);
    f("endpoint", b.endpoint);
    f("payload", payload);
    f("deadline_ms", deadline_ms);
    f("handshake_ms", handshake_ms);
    b.payload = payload_mode_from_string(payload);
    b.deadline = std::chrono::milliseconds(deadline_ms);
    b.handshake_deadline = std::chrono::milliseconds(handshake_ms);
  } else {
    visit_gains(section, s.gains, f);
  }
}

struct KeyLister {
  std::vector<std::string>& order;
  template <class T>
  void operator()(const char* key, T&) {
    order.push_back(key);
  }
};

std::string value_text(const json& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "-inf") return s;
    return v.dump();
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + value_text(v[i]);
    return out + "]";
  }
  return v.dump();
}

}  // namespace

RolloutSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a table of sections");
  const auto ver = doc.find("schema_version");
  if (ver == doc.end()) throw ConfigError("missing schema_version");
  if (!ver->is_number_integer() || ver->get<int>() != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  RolloutSpec spec;
  try {
    for (const auto& [name, body] : doc.items()) {
      if (name == "schema_version") continue;
      if (std::find(kSections.begin(), kSections.end(), name) == kSections.end()) {
        throw ConfigError("unknown section [" + name + "]");
      }
      if (!body.is_object()) throw ConfigError("[" + name + "] must be a table");
      Reader r{body, name, {}};
      visit_section(name, spec, r);
      r.finish();
    }
    spec.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
  return spec;
}

json spec_to_json(const RolloutSpec& spec) {
  RolloutSpec copy = spec;
  json doc = json::object();
  doc["schema_version"] = kConfigSchemaVersion;
  for (const auto& name : kSections) {
    json body = json::object();
    Writer w{body};
    visit_section(name, copy, w);
    doc[name] = std::move(body);
  }
  return doc;
}

std::string spec_to_text(const RolloutSpec& spec) {
  const json doc = spec_to_json(spec);
  std::string out = "schema_version = " + std::to_string(kConfigSchemaVersion) + "\n";
  for (const auto& name : kSections) {
    out += "\n[" + name + "]\n";
    RolloutSpec copy = spec;
    // Keep declaration order rather than the sorted order of the JSON object.
    std::vector<std::string> order;
    KeyLister keys{order};
    visit_section(name, copy, keys);
    for (const auto& k : order) out += k + " = " + value_text(doc.at(name).at(k)) + "\n";
  }
  return out;
}

RolloutSpec parse_config_text(const std::string& text) { return spec_from_json(parse_kv_text(text)); }

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_document(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    try {
      return json::parse(text);
    } catch (const json::exception& ex) {
      throw ConfigError(path.string() + ": " + ex.what());
    }
  }
  return parse_kv_text(text);
}

}  // namespace

RolloutSpec load_config(const std::filesystem::path& path) {
  try {
    return spec_from_json(read_document(path));
  } catch (const ConfigError& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

void set_gain(BaselineGains& gains, const std::string& key, double value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ConfigError("gain key must be <section>.<field>: " + key);
  const std::string section = key.substr(0, dot);
  if (section != "apf" && section != "angelani" && section != "janosov" && section != "evader") {
    throw ConfigError("unknown gain section '" + section + "'");
  }
  const json body = {{key.substr(dot + 1), value}};
  Reader r{body, section, {}};
  visit_gains(section, gains, r);
  r.finish();
}

BaselineGains load_gains(const std::filesystem::path& path) {
  const json doc = read_document(path);
  BaselineGains gains;
  for (const auto& [name, body] : doc.items()) {
    if (name != "apf" && name != "angelani" && name != "janosov" && name != "evader") continue;
    Reader r{body, name, {}};
    visit_gains(name, gains, r);
    r.finish();
  }
  return gains;
}

}  // namespace pesim
