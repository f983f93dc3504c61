#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "vsensor/baselines.hpp"
#include "vsensor/geograph.hpp"
#include "vsensor/sage.hpp"

namespace vsensor {

enum class ModelKind { Sage, Mlp, Cnn, Gbt };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::Sage;
  SageConfig sage;
  MlpConfig mlp;
  CnnConfig cnn;
  GbtConfig gbt;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Type-erased regressor over per-frame node feature matrices. The graph is
// ignored by the non-graph models.
class Model {
 public:
  using Impl = std::variant<SageModel, MlpModel, CnnModel, GbtModel>;

  Model() = default;
  Model(ModelConfig cfg, Impl impl) : cfg_(std::move(cfg)), impl_(std::move(impl)) {}

  // Fresh neural model with weights drawn from `seed`; GBT models start
  // empty and are produced by gbt_fit.
  static Model create(const ModelConfig& cfg, std::size_t input_dim, std::uint64_t seed);

  ModelKind kind() const { return cfg_.kind; }
  const ModelConfig& config() const { return cfg_; }
  bool is_neural() const { return cfg_.kind != ModelKind::Gbt; }
  std::size_t input_dim() const;

  Impl& impl() { return impl_; }
  const Impl& impl() const { return impl_; }

  using Cache = std::variant<std::monostate, SageModel::Cache, MlpModel::Cache, CnnModel::Cache>;

  // [targets x 1] predictions for the listed rows of one frame.
  Tensor2 forward(const Tensor2& node_feats, std::span<const std::size_t> targets, const SpatialGraph& g, Mode mode,
                  Rng& rng, Cache* cache) const;
  void backward(const Cache& cache, const Tensor2& d_pred);

  // Eval-mode prediction for a single node; graph models sample the node's
  // own neighbourhood.
  double predict_one(const Tensor2& node_feats, std::size_t node, const SpatialGraph& g, Rng& rng) const;

  ParamList parameters();
  void set_output_bias(double b);

 private:
  ModelConfig cfg_;
  Impl impl_;
};

}  // namespace vsensor
