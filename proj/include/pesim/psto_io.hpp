#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pesim/psto.hpp"

namespace pesim {

/// Channel 0 then channel 1, each row-major little-endian float32.
std::string psto_to_f32_bytes(const PstoTensor& t);

/// Inverse of psto_to_f32_bytes. Throws std::invalid_argument on a size mismatch.
PstoTensor psto_from_f32_bytes(std::string_view bytes, int rows, int cols);

struct PstoDumpMeta {
  int rows = 0;
  int cols = 0;
  double r_max = 0.0;
  IntentParams params;
};

nlohmann::json intent_params_to_json(const IntentParams& p);
IntentParams intent_params_from_json(const nlohmann::json& j);

/// Writes <bin_path> and the sidecar <bin_path>.json.
void write_psto_dump(const std::filesystem::path& bin_path, const PstoTensor& t, const PstoDumpMeta& meta);

struct PstoDump {
  PstoTensor tensor;
  PstoDumpMeta meta;
};

PstoDump read_psto_dump(const std::filesystem::path& bin_path);

}  // namespace pesim
