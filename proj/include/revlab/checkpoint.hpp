#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "revlab/regimes.hpp"

namespace revlab::regimes {

/// A trained model plus the configuration that produced it. Serialized as versioned JSON; every
/// parameter is written with round-trip precision, so save/load reproduces it bit for bit.
struct Checkpoint {
  std::string regime;  // stl | union | mtl | tl
  TrainConfig config;
  std::variant<StlModel, MtlModel> model;

  std::string config_hash() const { return config.hash(); }
};

inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when encoders and the head sequences match exactly, ignoring task names.
bool same_parameters(const Checkpoint& a, const Checkpoint& b);

}  // namespace revlab::regimes
