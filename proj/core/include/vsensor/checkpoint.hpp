#pragma once

// Binary checkpoint: "VSCK", u16 version, u64 schema hash, u32 + canonical
// JSON config, u32 block count, then named f64 blocks (little-endian).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "vsensor/dataset.hpp"
#include "vsensor/model.hpp"

namespace vsensor {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<StandardizationStats> stats;
  nlohmann::json config = nlohmann::json::object();  // caller metadata (training config etc.)
};

std::string encode_checkpoint(const Model& model, const std::optional<StandardizationStats>& stats,
                              const nlohmann::json& config, const FeatureSchema& schema = FeatureSchema::standard());
Checkpoint decode_checkpoint(const std::string& bytes, const FeatureSchema& schema = FeatureSchema::standard());

// Refuses models with non-finite parameters. Writes through a temp file.
void save_checkpoint(const std::string& path, const Model& model, const std::optional<StandardizationStats>& stats,
                     const nlohmann::json& config, const FeatureSchema& schema = FeatureSchema::standard());
Checkpoint load_checkpoint(const std::string& path, const FeatureSchema& schema = FeatureSchema::standard());

}  // namespace vsensor
