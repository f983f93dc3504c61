#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsensor {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 tensors.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// out += a^T * b
void matmul_at_b_acc(const Tensor2& a, const Tensor2& b, Tensor2& out);
// a * b^T
Tensor2 matmul_a_bt(const Tensor2& a, const Tensor2& b);
// y += x * W for a single row x (length W.rows())
void row_matmul_acc(std::span<const double> x, const Tensor2& w, std::span<double> y);
// y += w * x^T for a row gradient: y (length w.rows()) += W * g
void row_matmul_bt_acc(std::span<const double> g, const Tensor2& w, std::span<double> y);
// out += x^T g (outer product) for single rows
void outer_acc(std::span<const double> x, std::span<const double> g, Tensor2& out);

}  // namespace vsensor
