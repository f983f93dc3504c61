#include "vsensor/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsensor {

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

void glorot_init(Tensor2& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : w.values()) v = dist(rng);
}

DenseLayer::DenseLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : w(name + ".w", in, out), b(name + ".b", 1, out) {
  glorot_init(w.value, in, out, rng);
}

Tensor2 DenseLayer::forward(const Tensor2& x) const {
  if (x.cols() != in_dim()) {
    throw ShapeError("dense_forward: input " + x.shape_string() + " vs weight " +
                     w.value.shape_string());
  }
  Tensor2 y = matmul(x, w.value);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b.value[j];
  }
  return y;
}

Tensor2 DenseLayer::backward(const Tensor2& x, const Tensor2& dy) {
  if (dy.cols() != out_dim() || dy.rows() != x.rows()) {
    throw ShapeError("dense backward: dy " + dy.shape_string());
  }
  matmul_at_b_acc(x, dy, w.grad);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) b.grad[j] += row[j];
  }
  return matmul_a_bt(dy, w.value);
}

Tensor2 dense_forward(const DenseLayer& layer, const Tensor2& x) { return layer.forward(x); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {
template <class F>
Tensor2 map(const Tensor2& x, F f) {
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}
}  // namespace

Tensor2 relu(const Tensor2& x) { return map(x, [](double v) { return relu(v); }); }
Tensor2 leaky_relu(const Tensor2& x, double slope) {
  return map(x, [slope](double v) { return leaky_relu(v, slope); });
}
Tensor2 sigmoid(const Tensor2& x) { return map(x, [](double v) { return sigmoid(v); }); }

void relu_backward_inplace(const Tensor2& pre, Tensor2& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(pre[i] > 0.0)) dy[i] = 0.0;
  }
}

Tensor2 dropout_mask(std::size_t rows, std::size_t cols, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  Tensor2 mask(rows, cols, 1.0);
  if (mode == Mode::Eval || rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& m : mask.values()) m = u(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

Tensor2 dropout(const Tensor2& x, double rate, Mode mode, Rng& rng) {
  Tensor2 y = x;
  hadamard_inplace(y, dropout_mask(x.rows(), x.cols(), rate, mode, rng));
  return y;
}

void hadamard_inplace(Tensor2& x, const Tensor2& mask) {
  if (!x.same_shape(mask)) throw ShapeError("hadamard: " + x.shape_string() + " vs " + mask.shape_string());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

LossWithGrad mse_loss(const Tensor2& pred, const Tensor2& actual) {
  if (!pred.same_shape(actual)) {
    throw ShapeError("mse_loss: " + pred.shape_string() + " vs " + actual.shape_string());
  }
  if (pred.empty()) throw ShapeError("mse_loss: empty input");
  LossWithGrad out{0.0, Tensor2(pred.rows(), pred.cols())};
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    out.loss += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

void Adam::step(const ParamList& params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = *params[i];
    if (!p.grad.same_shape(m_[i]) || !p.value.same_shape(p.grad)) {
      throw ShapeError("Adam: shape mismatch for parameter " + p.name);
    }
    if (!p.grad.all_finite()) throw std::runtime_error("non-finite gradient in parameter " + p.name);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    const bool frozen = std::any_of(frozen_.begin(), frozen_.end(), [&](const std::string& pre) {
      return p.name.rfind(pre, 0) == 0;
    });
    if (frozen) continue;
    Tensor2& m = m_[i];
    Tensor2& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

GradCheckResult grad_check(const LossFn& loss, const ParamList& params, double h) {
  zero_grads(params);
  loss(true);
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double orig = p.value[k];
      p.value[k] = orig + h;
      const double fp = loss(false);
      p.value[k] = orig - h;
      const double fm = loss(false);
      p.value[k] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_rel_error || !std::isfinite(rel)) {
        res = {rel, p.name, k, a, numeric};
      }
    }
  }
  zero_grads(params);
  return res;
}

}  // namespace vsensor
