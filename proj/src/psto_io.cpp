#include "pesim/psto_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pesim {

static_assert(std::endian::native == std::endian::little, "PSTO dump assumes a little-endian host");

namespace {

void append_channel(std::string& out, const Grid& g) {
  for (double v : g.data()) {
    const float f = static_cast<float>(v);
    char buf[sizeof(float)];
    std::memcpy(buf, &f, sizeof(float));
    out.append(buf, sizeof(float));
  }
}

Grid read_channel(std::string_view bytes, std::size_t offset, int rows, int cols) {
  Grid g(rows, cols);
  auto data = g.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + offset + i * sizeof(float), sizeof(float));
    data[i] = f;
  }
  return g;
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
  return std::filesystem::path(bin_path.string() + ".json");
}

}  // namespace

std::string psto_to_f32_bytes(const PstoTensor& t) {
  std::string out;
  out.reserve((t.lidar.data().size() + t.intent.data().size()) * sizeof(float));
  append_channel(out, t.lidar);
  append_channel(out, t.intent);
  return out;
}

PstoTensor psto_from_f32_bytes(std::string_view bytes, int rows, int cols) {
  const std::size_t per_channel = static_cast<std::size_t>(rows) * cols * sizeof(float);
  if (rows <= 0 || cols <= 0 || bytes.size() != 2 * per_channel) {
    throw std::invalid_argument("PSTO payload size does not match 2 x rows x cols float32");
  }
  return {read_channel(bytes, 0, rows, cols), read_channel(bytes, per_channel, rows, cols)};
}

nlohmann::json intent_params_to_json(const IntentParams& p) {
  return {{"V_evader", p.evader_strength},   {"V_teammate", p.teammate_strength},
          {"lambda_e", p.evader_decay},      {"lambda_t", p.teammate_decay},
          {"T_future", p.horizon},           {"dt", p.dt},
          {"distance_floor", p.distance_floor}, {"history_window", p.history_window}};
}

IntentParams intent_params_from_json(const nlohmann::json& j) {
  IntentParams p;
  p.evader_strength = j.value("V_evader", p.evader_strength);
  p.teammate_strength = j.value("V_teammate", p.teammate_strength);
  p.evader_decay = j.value("lambda_e", p.evader_decay);
  p.teammate_decay = j.value("lambda_t", p.teammate_decay);
  p.horizon = j.value("T_future", p.horizon);
  p.dt = j.value("dt", p.dt);
  p.distance_floor = j.value("distance_floor", p.distance_floor);
  p.history_window = j.value("history_window", p.history_window);
  return p;
}

void write_psto_dump(const std::filesystem::path& bin_path, const PstoTensor& t, const PstoDumpMeta& meta) {
  {
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
    const std::string bytes = psto_to_f32_bytes(t);
    bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!bin) throw std::runtime_error("write failed for " + bin_path.string());
  }
  nlohmann::json side = {{"V_d", meta.rows},
                         {"H_d", meta.cols},
                         {"r_max", meta.r_max},
                         {"dtype", "float32"},
                         {"layout", "channel,row,col"},
                         {"channels", {"M_LiDAR", "H_intent"}},
                         {"params", intent_params_to_json(meta.params)}};
  std::ofstream js(sidecar_path(bin_path), std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write sidecar for " + bin_path.string());
  js << side.dump(2) << '\n';
}

PstoDump read_psto_dump(const std::filesystem::path& bin_path) {
  std::ifstream js(sidecar_path(bin_path));
  if (!js) throw std::runtime_error("missing sidecar for " + bin_path.string());
  const auto side = nlohmann::json::parse(js);
  PstoDump dump;
  dump.meta.rows = side.at("V_d").get<int>();
  dump.meta.cols = side.at("H_d").get<int>();
  dump.meta.r_max = side.at("r_max").get<double>();
  dump.meta.params = intent_params_from_json(side.at("params"));

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path.string());
  std::stringstream ss;
  ss << bin.rdbuf();
  dump.tensor = psto_from_f32_bytes(ss.str(), dump.meta.rows, dump.meta.cols);
  return dump;
}

}  // namespace pesim
