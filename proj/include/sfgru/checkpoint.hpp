#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sfgru/model.hpp"

namespace sfgru {

// Checkpoint container: one magic line, one JSON header line describing the
// spec and the array manifest, then the raw array payloads as little-endian
// 64-bit floats in manifest order. Write-then-read is bit-exact.
inline constexpr const char* kCheckpointMagic = "SFGRU-CKPT v1";

namespace detail {

inline std::uint64_t to_le_bits(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

inline double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  double x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelSpec& spec, ModelParams& params) {
  nlohmann::json header;
  header["model"] = to_string(spec.kind);
  nlohmann::json order = nlohmann::json::array();
  for (FeatureKey k : spec.fusion_order) order.push_back(to_string(k));
  header["fusion_order"] = order;
  header["hidden_dim"] = spec.hidden_dim;
  header["obs_len"] = spec.obs_len;
  header["use_bias"] = spec.use_bias;
  nlohmann::json arrays = nlohmann::json::array();
  for_each_param(params, [&](const std::string& name, bool, std::span<double> v) {
    arrays.push_back({{"name", name}, {"size", v.size()}});
  });
  header["arrays"] = arrays;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("save_checkpoint: cannot open " + path);
  out << kCheckpointMagic << "\n" << header.dump() << "\n";
  for_each_param(params, [&](const std::string&, bool, std::span<double> v) {
    for (double x : v) {
      const std::uint64_t bits = detail::to_le_bits(x);
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  });
  if (!out) throw error("save_checkpoint: write failed for " + path);
}

inline std::pair<ModelSpec, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw schema_error("load_checkpoint: cannot open " + path);
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw schema_error("load_checkpoint: bad magic in " + path);
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw schema_error("load_checkpoint: bad header: " + std::string(e.what()));
  }

  ModelSpec spec;
  spec.kind = parse_model_kind(header.at("model").get<std::string>());
  spec.fusion_order.clear();
  for (const auto& k : header.at("fusion_order")) {
    spec.fusion_order.push_back(parse_feature_key(k.get<std::string>()));
  }
  spec.hidden_dim = header.at("hidden_dim").get<std::size_t>();
  spec.obs_len = header.at("obs_len").get<std::size_t>();
  spec.use_bias = header.at("use_bias").get<bool>();

  ModelParams params = make_model_params(spec);
  std::size_t idx = 0;
  const auto& arrays = header.at("arrays");
  for_each_param(params, [&](const std::string& name, bool, std::span<double> v) {
    if (idx >= arrays.size()) throw schema_error("load_checkpoint: array manifest too short");
    const auto& entry = arrays[idx++];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("size").get<std::size_t>() != v.size()) {
      throw schema_error("load_checkpoint: manifest mismatch at " + name);
    }
    for (double& x : v) {
      std::uint64_t bits;
      in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      if (!in) throw schema_error("load_checkpoint: truncated payload at " + name);
      x = detail::from_le_bits(bits);
    }
  });
  if (idx != arrays.size()) throw schema_error("load_checkpoint: array manifest too long");
  char extra;
  if (in.read(&extra, 1)) throw schema_error("load_checkpoint: trailing bytes in " + path);
  return {spec, params};
}

}  // namespace sfgru
