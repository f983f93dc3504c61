#include "vsensor/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace vsensor {

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor2 t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for Tensor2");
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  Tensor2 t(1, values.size());
  std::copy(values.begin(), values.end(), t.data_.begin());
  return t;
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    row_matmul_acc(a.row(i), b, out.row(i));
  }
  return out;
}

void matmul_at_b_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("matmul_at_b_acc: " + a.shape_string() + "^T * " + b.shape_string() +
                     " -> " + out.shape_string());
  }
  for (std::size_t k = 0; k < a.rows(); ++k) outer_acc(a.row(k), b.row(k), out);
}

Tensor2 matmul_a_bt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_a_bt: " + a.shape_string() + " * " + b.shape_string() + "^T");
  }
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) row_matmul_bt_acc(a.row(i), b, out.row(i));
  return out;
}

void row_matmul_acc(std::span<const double> x, const Tensor2& w, std::span<double> y) {
  const std::size_t n = w.cols();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* wr = w.row(k).data();
    for (std::size_t j = 0; j < n; ++j) y[j] += xk * wr[j];
  }
}

void row_matmul_bt_acc(std::span<const double> g, const Tensor2& w, std::span<double> y) {
  for (std::size_t k = 0; k < w.rows(); ++k) {
    const double* wr = w.row(k).data();
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) s += wr[j] * g[j];
    y[k] += s;
  }
}

void outer_acc(std::span<const double> x, std::span<const double> g, Tensor2& out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* orow = out.row(i).data();
    for (std::size_t j = 0; j < g.size(); ++j) orow[j] += xi * g[j];
  }
}

}  // namespace vsensor
