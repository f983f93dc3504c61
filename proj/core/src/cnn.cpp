#include <stdexcept>

#include "vsensor/baselines.hpp"

namespace vsensor {

namespace {

// out[b][c*L + i] = bias[c] + sum_{ci,k} w[c][ci*K + k] * in[b][ci*L + i + k - pad]
Tensor2 conv1d(const Tensor2& in, std::size_t in_ch, const Tensor2& w, const Tensor2& bias, std::size_t len,
               std::size_t kernel) {
  const std::size_t out_ch = w.rows();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel / 2);
  Tensor2 out(in.rows(), out_ch * len);
  for (std::size_t b = 0; b < in.rows(); ++b) {
    auto x = in.row(b);
    auto y = out.row(b);
    for (std::size_t c = 0; c < out_ch; ++c) {
      auto wc = w.row(c);
      for (std::size_t i = 0; i < len; ++i) {
        double s = bias[c];
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
          for (std::size_t k = 0; k < kernel; ++k) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + k) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            s += wc[ci * kernel + k] * x[ci * len + static_cast<std::size_t>(src)];
          }
        }
        y[c * len + i] = s;
      }
    }
  }
  return out;
}

// Accumulates dW, db; returns d(in) when requested.
Tensor2 conv1d_backward(const Tensor2& in, std::size_t in_ch, const Tensor2& w, const Tensor2& dout,
                        std::size_t len, std::size_t kernel, Tensor2& dw, Tensor2& db, bool need_input_grad) {
  const std::size_t out_ch = w.rows();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel / 2);
  Tensor2 din(need_input_grad ? in.rows() : 0, need_input_grad ? in_ch * len : 0);
  for (std::size_t b = 0; b < in.rows(); ++b) {
    auto x = in.row(b);
    auto g = dout.row(b);
    for (std::size_t c = 0; c < out_ch; ++c) {
      auto wc = w.row(c);
      auto dwc = dw.row(c);
      for (std::size_t i = 0; i < len; ++i) {
        const double gi = g[c * len + i];
        if (gi == 0.0) continue;
        db[c] += gi;
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
          for (std::size_t k = 0; k < kernel; ++k) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + k) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            const std::size_t xi = ci * len + static_cast<std::size_t>(src);
            dwc[ci * kernel + k] += gi * x[xi];
            if (need_input_grad) din(b, xi) += gi * wc[ci * kernel + k];
          }
        }
      }
    }
  }
  return din;
}

}  // namespace

CnnModel::CnnModel(std::size_t input_dim, const CnnConfig& cfg, Rng& rng) : cfg_(cfg), len_(input_dim) {
  if (cfg.kernel == 0 || cfg.kernel > input_dim) throw std::invalid_argument("CnnConfig: kernel must be in [1, input_dim]");
  if (cfg.channels == 0 || cfg.hidden == 0) throw std::invalid_argument("CnnConfig: sizes must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw std::invalid_argument("CnnConfig: dropout must lie in [0, 1)");
  const std::size_t c = cfg.channels;
  const std::size_t k = cfg.kernel;
  conv1_w = Param("cnn.conv1.w", c, k);
  conv1_b = Param("cnn.conv1.b", 1, c);
  conv2_w = Param("cnn.conv2.w", c, c * k);
  conv2_b = Param("cnn.conv2.b", 1, c);
  glorot_init(conv1_w.value, k, c * k, rng);
  glorot_init(conv2_w.value, c * k, c * k, rng);
  fc1 = DenseLayer("cnn.fc1", c * input_dim, cfg.hidden, rng);
  fc2 = DenseLayer("cnn.fc2", cfg.hidden, 1, rng);
}

Tensor2 CnnModel::forward(const Tensor2& x, Mode mode, Rng& rng, Cache* cache) const {
  if (x.cols() != len_) throw ShapeError("cnn_forward: expected " + std::to_string(len_) + " features");
  const std::size_t c = cfg_.channels;
  Tensor2 z1 = conv1d(x, 1, conv1_w.value, conv1_b.value, len_, cfg_.kernel);
  Tensor2 a1 = relu(z1);
  Tensor2 z2 = conv1d(a1, c, conv2_w.value, conv2_b.value, len_, cfg_.kernel);
  Tensor2 a2 = relu(z2);
  Tensor2 mask = dropout_mask(a2.rows(), a2.cols(), cfg_.dropout, mode, rng);
  Tensor2 d2 = a2;
  hadamard_inplace(d2, mask);
  Tensor2 z3 = fc1.forward(d2);
  Tensor2 a3 = relu(z3);
  Tensor2 y = fc2.forward(a3);
  if (cache) {
    *cache = {x, std::move(z1), std::move(a1), std::move(z2), std::move(a2), std::move(mask), std::move(d2),
              std::move(z3), std::move(a3)};
  }
  return y;
}

void CnnModel::backward(const Cache& c, const Tensor2& d_pred) {
  Tensor2 g = fc2.backward(c.a3, d_pred);
  relu_backward_inplace(c.z3, g);
  g = fc1.backward(c.d2, g);
  hadamard_inplace(g, c.mask);
  relu_backward_inplace(c.z2, g);
  g = conv1d_backward(c.a1, cfg_.channels, conv2_w.value, g, len_, cfg_.kernel, conv2_w.grad, conv2_b.grad, true);
  relu_backward_inplace(c.z1, g);
  conv1d_backward(c.x, 1, conv1_w.value, g, len_, cfg_.kernel, conv1_w.grad, conv1_b.grad, false);
}

ParamList CnnModel::parameters() {
  ParamList out{&conv1_w, &conv1_b, &conv2_w, &conv2_b};
  fc1.collect(out);
  fc2.collect(out);
  return out;
}

}  // namespace vsensor
