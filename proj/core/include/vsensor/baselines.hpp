#pragma once

// Non-graph comparators: MLP, 1-D CNN over the feature vector, and
// least-squares gradient-boosted regression trees. All three consume the
// same standardised feature rows as the graph model.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vsensor/nn.hpp"

namespace vsensor {

struct MlpConfig {
  std::array<std::size_t, 3> hidden{64, 64, 32};
  double dropout = 0.5;
};

// dense-relu, dense-relu, dropout, dense-relu, dense (linear output).
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t input_dim, const MlpConfig& cfg, Rng& rng);

  struct Cache {
    Tensor2 x, z1, a1, z2, a2, mask, d2, z3, a3;
  };

  // x: [batch x input_dim] -> [batch x 1]
  Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng, Cache* cache) const;
  void backward(const Cache& cache, const Tensor2& d_pred);

  ParamList parameters();
  const MlpConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return l1.in_dim(); }

  DenseLayer l1, l2, l3, l4;

 private:
  MlpConfig cfg_;
};

struct CnnConfig {
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::size_t hidden = 32;
  double dropout = 0.5;
};

// Two same-padded 1-D convolutions (stride 1) over the feature vector as a
// single-channel sequence, dropout, then two dense layers to a scalar.
class CnnModel {
 public:
  CnnModel() = default;
  CnnModel(std::size_t input_dim, const CnnConfig& cfg, Rng& rng);

  struct Cache {
    Tensor2 x;
    Tensor2 z1, a1;  // [batch x channels*len], channel-major
    Tensor2 z2, a2;
    Tensor2 mask, d2;
    Tensor2 z3, a3;
  };

  Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng, Cache* cache) const;
  void backward(const Cache& cache, const Tensor2& d_pred);

  ParamList parameters();
  const CnnConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return len_; }

  Param conv1_w;  // [channels x kernel]
  Param conv1_b;  // [1 x channels]
  Param conv2_w;  // [channels x channels*kernel]
  Param conv2_b;
  DenseLayer fc1, fc2;

 private:
  CnnConfig cfg_;
  std::size_t len_ = 0;
};

struct GbtConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
};

// Flat tree: internal nodes route x[feature] <= threshold to `left`.
struct RegressionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
  std::size_t leaf_count() const;
};

struct GbtModel {
  GbtConfig config;
  double init = 0.0;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
  // Training MSE after the initial constant and after each tree.
  std::vector<double> train_mse;

  double predict(std::span<const double> x) const;
  // Prediction using only the first `n_trees` trees.
  double predict_partial(std::span<const double> x, std::size_t n_trees) const;
};

// x: [rows x features], y: rows.
GbtModel gbt_fit(const Tensor2& x, std::span<const double> y, const GbtConfig& cfg);
double gbt_predict(const GbtModel& model, std::span<const double> x);

}  // namespace vsensor
