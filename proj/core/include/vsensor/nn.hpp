#pragma once

// Minimal dense numerical core: parameters, dense layers, activations,
// dropout, MSE, Adam and a finite-difference gradient checker. Every layer
// exposes an explicit backward function; there is no general autodiff tape.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vsensor/tensor.hpp"

namespace vsensor {

using Rng = std::mt19937_64;

enum class Mode { Train, Eval };

// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<Param*>;

void zero_grads(const ParamList& params);

// Uniform Glorot initialisation in +-sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor2& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct DenseLayer {
  Param w;  // [in x out]
  Param b;  // [1 x out]

  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return w.value.rows(); }
  std::size_t out_dim() const { return w.value.cols(); }

  // y = xW + b
  Tensor2 forward(const Tensor2& x) const;
  // Accumulates dW, db and returns dx.
  Tensor2 backward(const Tensor2& x, const Tensor2& dy);

  void collect(ParamList& out) { out.push_back(&w); out.push_back(&b); }
};

Tensor2 dense_forward(const DenseLayer& layer, const Tensor2& x);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double leaky_relu(double x, double slope = 0.2) { return x > 0.0 ? x : slope * x; }
double sigmoid(double x);

Tensor2 relu(const Tensor2& x);
Tensor2 leaky_relu(const Tensor2& x, double slope = 0.2);
Tensor2 sigmoid(const Tensor2& x);

// dx = dy * relu'(pre), in place on dy.
void relu_backward_inplace(const Tensor2& pre, Tensor2& dy);

// Inverted dropout mask: entries are 0 with probability `rate`, otherwise
// 1/(1-rate). Eval mode (or rate 0) yields an all-ones mask without drawing
// from the generator.
Tensor2 dropout_mask(std::size_t rows, std::size_t cols, double rate, Mode mode, Rng& rng);
Tensor2 dropout(const Tensor2& x, double rate, Mode mode, Rng& rng);
void hadamard_inplace(Tensor2& x, const Tensor2& mask);

struct LossWithGrad {
  double loss = 0.0;
  Tensor2 grad;
};

// Mean squared error over all entries; grad = 2 (pred - actual) / n.
LossWithGrad mse_loss(const Tensor2& pred, const Tensor2& actual);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one bias-corrected update. Throws if any gradient is non-finite,
  // naming the offending parameter. Parameters listed in `frozen` keep their
  // values (matched by name prefix).
  void step(const ParamList& params);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_frozen_prefixes(std::vector<std::string> prefixes) { frozen_ = std::move(prefixes); }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  std::vector<std::string> frozen_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// `loss(true)` must zero nothing itself but accumulate gradients into every
// Param::grad and return the loss; `loss(false)` only returns the loss. The
// checker zeroes gradients before the analytic pass. Any randomness inside
// `loss` must be reseeded per call so the mask is frozen across evaluations.
using LossFn = std::function<double(bool with_grad)>;
GradCheckResult grad_check(const LossFn& loss, const ParamList& params, double h = 1e-5);

}  // namespace vsensor
