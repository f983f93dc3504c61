#pragma once

// Training loops, pretrain/fine-tune transfer, and leave-one-location-out
// evaluation.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsensor/dataset.hpp"
#include "vsensor/geograph.hpp"
#include "vsensor/metrics.hpp"
#include "vsensor/model.hpp"

namespace vsensor {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t patience = 10;
  // Chronological tail of the usable frames held out for early stopping.
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::string> frozen;  // parameter-name prefixes kept fixed
  std::size_t knn_k = 3;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TransferConfig {
  TrainConfig source;
  std::size_t finetune_epochs = 20;
  double finetune_lr = 1e-4;
  std::vector<std::string> frozen;
  // Standardise the target city with the source statistics instead of its own.
  bool use_source_stats = false;

  void validate() const;
};

nlohmann::json to_json(const TransferConfig& c);
TransferConfig transfer_config_from_json(const nlohmann::json& j);

enum class AccessPhase { Training, Init, Metric };

// Notified for every target value the pipeline reads.
class TargetAccessObserver {
 public:
  virtual ~TargetAccessObserver() = default;
  virtual void on_read(AccessPhase phase, std::size_t frame, std::size_t sensor) = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean batch loss per epoch (train mode)
  std::vector<double> val_loss;    // teacher-forced eval-mode MSE per epoch
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

// Fills the autoregressive column and standardises with the dataset's own
// statistics (or the supplied ones).
Dataset prepare(const Dataset& raw);
Dataset prepare_with_stats(const Dataset& raw, const StandardizationStats& stats);

// Teacher-forced training on a prepared dataset. When `init` is given the
// model starts from those weights (fine-tuning) with fresh optimizer state.
TrainResult train(const Dataset& ds, const SpatialGraph& g, const TrainConfig& cfg, const Model* init = nullptr,
                  TargetAccessObserver* observer = nullptr);

// Eval-mode teacher-forced MSE over frames t >= 1 (all frames when `frames`
// is empty).
double evaluate_mse(const Model& model, const Dataset& ds, const SpatialGraph& g,
                    const std::vector<std::size_t>& frames = {});

struct TransferResult {
  Model pretrained;
  Model finetuned;
  TrainHistory pretrain_history;
  TrainHistory finetune_history;
};

// Fine-tunes an already pretrained model on the target city.
TrainResult finetune(const Model& pretrained, const Dataset& target, const SpatialGraph& g, const TransferConfig& cfg,
                     TargetAccessObserver* observer = nullptr);

TransferResult transfer(const Dataset& source, const Dataset& target, const SpatialGraph& source_graph,
                        const SpatialGraph& target_graph, const TransferConfig& cfg);

struct EvalConfig {
  TrainConfig train;
  // When set, every fold fine-tunes from these weights instead of training
  // from scratch.
  std::optional<Model> pretrained;
  TransferConfig finetune;
  std::optional<StandardizationStats> fixed_stats;
  InitScheme init = InitScheme::actual_first();
  std::size_t threads = 1;
};

struct FoldResult {
  std::size_t heldout = 0;
  Model model;
  StandardizationStats stats;
  std::size_t start_frame = 0;
  std::vector<double> predictions;  // frames start_frame+1 .. T-1, clipped at 0
  std::optional<LocationMetrics> metrics;
  std::optional<std::string> warning;
};

// Trains on every sensor except `heldout` (which stays in the graph as a
// feature provider with hidden targets) and rolls out on it.
FoldResult run_fold(const Dataset& raw, const SpatialGraph& g, const EvalConfig& cfg, std::size_t heldout,
                    TargetAccessObserver* observer = nullptr);

EvalReport leave_one_out(const Dataset& raw, const SpatialGraph& g, const EvalConfig& cfg,
                         TargetAccessObserver* observer = nullptr);

// Per-fold seed derived from the run seed and the held-out index.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

}  // namespace vsensor
