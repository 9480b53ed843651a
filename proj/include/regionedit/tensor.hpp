#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "regionedit/common.hpp"

namespace regionedit {

// Dense row-major tensor of doubles. Math is done in double end to end;
// float32 only appears at the file-format boundary.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v);

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // 2-d accessors (rows x cols).
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double* row(std::size_t i) { return data.data() + i * shape[1]; }
  const double* row(std::size_t i) const { return data.data() + i * shape[1]; }

  Tensor reshaped(std::vector<std::size_t> s) const;

  void fill_gaussian(Rng& rng, double stddev = 1.0);
  bool all_finite() const;
};

// C = A * B with A (m x k), B (k x n).
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
Tensor matmul(const Tensor& a, const Tensor& b);

// C = A * B^T with A (m x k), B (n x k). Used for attention scores.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// C = A^T * B with A (k x m), B (k x n). Used for weight gradients.
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Row-wise softmax with max subtraction, in place.
void softmax_rows(Tensor& m);

void add_inplace(Tensor& a, const Tensor& b);
void sub_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, double s);
void axpy_inplace(Tensor& a, double s, const Tensor& b);  // a += s * b

double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double rel_l2_diff(const Tensor& a, const Tensor& b);  // |a-b| / max(|b|, tiny)

}  // namespace regionedit
