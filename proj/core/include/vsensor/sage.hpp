#pragma once

// Two-layer GraphSAGE regressor with sampled neighbourhoods, four
// aggregators and closed-loop autoregressive rollout.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vsensor/dataset.hpp"
#include "vsensor/geograph.hpp"
#include "vsensor/nn.hpp"

namespace vsensor {

enum class AggregatorKind { Mean, MaxPool, MeanPool, Attentional };

std::string to_string(AggregatorKind k);
AggregatorKind aggregator_from_string(const std::string& s);
inline constexpr std::array<AggregatorKind, 4> kAllAggregators{
    AggregatorKind::Mean, AggregatorKind::MaxPool, AggregatorKind::MeanPool, AggregatorKind::Attentional};

struct SageConfig {
  AggregatorKind aggregator = AggregatorKind::MeanPool;
  std::array<std::size_t, 2> hidden{32, 32};
  std::size_t pool_dim = 32;
  SampleBudget budget{};
  double dropout = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// One aggregation layer:
//   h' = relu(dropout(x_self W_self + agg(neighbours) W_neigh + b))
// For the attentional aggregator the aggregate is already in the hidden
// space (sum of attention-weighted W_neigh u) and is added directly.
class SageLayer {
 public:
  SageLayer() = default;
  SageLayer(const std::string& name, AggregatorKind kind, std::size_t d_in, std::size_t d_out,
            std::size_t pool_dim, Rng& rng);

  struct Cache {
    Tensor2 in;
    std::vector<std::size_t> self_rows;
    std::vector<std::vector<std::size_t>> neigh_rows;
    Tensor2 pooled;  // sigmoid(in W_pool + b_pool), pooling aggregators
    Tensor2 proj;    // in W_neigh, attentional aggregator
    Tensor2 agg;
    std::vector<std::vector<std::size_t>> argmax;  // MaxPool: per output row, per pool unit
    std::vector<std::vector<double>> alpha;        // Attentional weights
    std::vector<std::vector<double>> scores;       // Attentional pre-LeakyReLU scores
    Tensor2 pre;                                   // after dropout, before relu
    Tensor2 mask;
  };

  AggregatorKind kind() const { return kind_; }
  std::size_t in_dim() const { return w_self.value.rows(); }
  std::size_t out_dim() const { return w_self.value.cols(); }
  // Width of the aggregated neighbour vector.
  std::size_t agg_dim() const;

  // `in` holds every candidate input row; output row i combines
  // in[self_rows[i]] with in[neigh_rows[i][*]]. `mask` is [k x out_dim].
  Tensor2 forward(const Tensor2& in, std::span<const std::size_t> self_rows,
                  const std::vector<std::vector<std::size_t>>& neigh_rows, const Tensor2& mask,
                  Cache* cache) const;
  // Accumulates parameter gradients; returns d(in) when requested.
  Tensor2 backward(const Cache& cache, const Tensor2& d_out, bool need_input_grad);

  // Stand-alone aggregate of raw neighbour vectors. Empty neighbour set
  // yields the zero vector of agg_dim().
  std::vector<double> aggregate(std::span<const double> self,
                                const std::vector<std::vector<double>>& neighbors) const;
  // Softmax weights of the attentional aggregator, one per neighbour.
  std::vector<double> attention_weights(std::span<const double> self,
                                        const std::vector<std::vector<double>>& neighbors) const;

  void collect(ParamList& out);

  Param w_self;
  Param w_neigh;
  Param bias;
  Param w_pool;
  Param b_pool;
  Param attention;  // [1 x 2*out_dim]

 private:
  void aggregate_rows(const Tensor2& in, const Tensor2& pooled, const Tensor2& proj, std::size_t self_row,
                      std::span<const std::size_t> neigh, std::span<double> out,
                      std::vector<std::size_t>* argmax, std::vector<double>* alpha,
                      std::vector<double>* scores) const;

  AggregatorKind kind_ = AggregatorKind::MeanPool;
};

// Which nodes are embedded at each layer for one batch of targets.
struct SagePlan {
  std::vector<std::size_t> l1_nodes;                // sorted graph ids
  std::vector<std::vector<std::size_t>> l1_neigh;   // graph ids, parallel to l1_nodes
  std::vector<std::size_t> targets;
  std::vector<std::vector<std::size_t>> l2_neigh;   // graph ids, parallel to targets
};

// Batch plan: layer-2 neighbours sampled per target (first-hop budget),
// then layer-1 neighbours once per embedded node (second-hop budget).
SagePlan plan_batch(const SpatialGraph& g, std::span<const std::size_t> targets, const SampleBudget& budget,
                    Rng& rng);
// Single-target plan built from sample_neighborhood(); the target's own
// layer-1 neighbours are drawn afterwards with the second-hop budget.
SagePlan plan_single(const SpatialGraph& g, std::size_t node, const SampleBudget& budget, Rng& rng);

class SageModel {
 public:
  SageModel() = default;
  SageModel(std::size_t input_dim, const SageConfig& cfg, Rng& init_rng);

  struct Cache {
    SagePlan plan;
    SageLayer::Cache c1;
    SageLayer::Cache c2;
    Tensor2 h2;
  };

  // Returns [targets x 1] predictions in ug/m3. Dropout masks are drawn
  // from `rng` only in train mode.
  Tensor2 forward(const Tensor2& node_feats, const SagePlan& plan, Mode mode, Rng& rng, Cache* cache) const;
  void backward(const Cache& cache, const Tensor2& d_pred);

  ParamList parameters();
  const SageConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return layer1.in_dim(); }

  SageLayer layer1;
  SageLayer layer2;
  DenseLayer head;

 private:
  SageConfig cfg_;
};

// Prediction for a single node of the graph.
double sage_forward(const SageModel& model, const SpatialGraph& g, const Tensor2& node_feats, std::size_t node,
                    Rng& rng, Mode mode);

struct TrainingRow {
  std::size_t frame;
  std::size_t node;
  std::vector<double> features;
  double target;
};

// One row per (present sensor, frame t >= 1). The dataset must already carry
// the filled autoregressive column.
std::vector<TrainingRow> make_training_rows(const Dataset& ds, const SpatialGraph& g);

enum class InitKind { ActualFirst, FixedEstimate, DatasetMean };

struct InitScheme {
  InitKind kind = InitKind::ActualFirst;
  double value = 0.0;

  static InitScheme actual_first() { return {InitKind::ActualFirst, 0.0}; }
  static InitScheme fixed(double c) { return {InitKind::FixedEstimate, c}; }
  static InitScheme dataset_mean() { return {InitKind::DatasetMean, 0.0}; }
};

std::string to_string(const InitScheme& s);
InitScheme init_scheme_from_string(const std::string& s);

struct ResolvedInit {
  double value;            // ug/m3
  std::size_t start_frame; // the autoregressive slot of start_frame + 1 holds `value`
};

// ActualFirst uses the node's reading at frame 0, or at its first present
// frame when frame 0 is missing. Other schemes start at frame 0.
ResolvedInit resolve_init(const Dataset& ds, std::size_t node, const InitScheme& init);

// Produces a prediction for a node's feature matrix.
using FramePredictor = std::function<double(const Tensor2& node_feats, std::size_t node)>;

// Closed-loop rollout: the node's autoregressive slot holds `init` for frame
// start+1 and the previous prediction afterwards; every other node keeps its
// dataset row. Returns predictions for frames start+1 .. T-1.
std::vector<double> rollout_series(const Dataset& ds, std::size_t node, const ResolvedInit& init,
                                   const FramePredictor& predict);

std::vector<double> rollout(const SageModel& model, const SpatialGraph& g, const Dataset& ds,
                            std::size_t target_node, const InitScheme& init, Rng& rng);

}  // namespace vsensor
