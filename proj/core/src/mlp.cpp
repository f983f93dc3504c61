#include <stdexcept>

#include "vsensor/baselines.hpp"

namespace vsensor {

MlpModel::MlpModel(std::size_t input_dim, const MlpConfig& cfg, Rng& rng)
    : l1("mlp.l1", input_dim, cfg.hidden[0], rng),
      l2("mlp.l2", cfg.hidden[0], cfg.hidden[1], rng),
      l3("mlp.l3", cfg.hidden[1], cfg.hidden[2], rng),
      l4("mlp.l4", cfg.hidden[2], 1, rng),
      cfg_(cfg) {
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw std::invalid_argument("MlpConfig: dropout must lie in [0, 1)");
}

Tensor2 MlpModel::forward(const Tensor2& x, Mode mode, Rng& rng, Cache* cache) const {
  Tensor2 z1 = l1.forward(x);
  Tensor2 a1 = relu(z1);
  Tensor2 z2 = l2.forward(a1);
  Tensor2 a2 = relu(z2);
  Tensor2 mask = dropout_mask(a2.rows(), a2.cols(), cfg_.dropout, mode, rng);
  Tensor2 d2 = a2;
  hadamard_inplace(d2, mask);
  Tensor2 z3 = l3.forward(d2);
  Tensor2 a3 = relu(z3);
  Tensor2 y = l4.forward(a3);
  if (cache) {
    *cache = {x, std::move(z1), std::move(a1), std::move(z2), std::move(a2), std::move(mask), std::move(d2),
              std::move(z3), std::move(a3)};
  }
  return y;
}

void MlpModel::backward(const Cache& c, const Tensor2& d_pred) {
  Tensor2 g = l4.backward(c.a3, d_pred);
  relu_backward_inplace(c.z3, g);
  g = l3.backward(c.d2, g);
  hadamard_inplace(g, c.mask);
  relu_backward_inplace(c.z2, g);
  g = l2.backward(c.a1, g);
  relu_backward_inplace(c.z1, g);
  l1.backward(c.x, g);
}

ParamList MlpModel::parameters() {
  ParamList out;
  l1.collect(out);
  l2.collect(out);
  l3.collect(out);
  l4.collect(out);
  return out;
}

}  // namespace vsensor
