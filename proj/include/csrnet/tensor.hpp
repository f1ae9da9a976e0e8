#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "csrnet/errors.hpp"

namespace csrnet {

// Dense row-major double tensor, rank 1-3. Rank and shape are dynamic;
// hot kernels grab data() and index manually.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor zeros(std::vector<int> dims) {
    Tensor t;
    t.shape = std::move(dims);
    std::size_t n = 1;
    for (int d : t.shape) {
      if (d <= 0) throw shape_error("tensor dimension must be positive");
      n *= static_cast<std::size_t>(d);
    }
    if (t.shape.empty() || t.shape.size() > 3) {
      throw shape_error("tensor rank must be 1-3");
    }
    t.v.assign(n, 0.0);
    return t;
  }

  static Tensor zeros(std::initializer_list<int> dims) {
    return zeros(std::vector<int>(dims));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  std::size_t numel() const { return v.size(); }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& at(int i) { return v[static_cast<std::size_t>(i)]; }
  double at(int i) const { return v[static_cast<std::size_t>(i)]; }

  double& at(int i, int j) {
    return v[static_cast<std::size_t>(i) * shape[1] + j];
  }
  double at(int i, int j) const {
    return v[static_cast<std::size_t>(i) * shape[1] + j];
  }

  double& at(int i, int j, int k) {
    return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at(int i, int j, int k) const {
    return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  // Start of row i for rank-2, or of slice (i, j) for rank-3.
  double* row(int i) { return v.data() + static_cast<std::size_t>(i) * shape[1]; }
  const double* row(int i) const {
    return v.data() + static_cast<std::size_t>(i) * shape[1];
  }
  double* row(int i, int j) {
    return v.data() + (static_cast<std::size_t>(i) * shape[1] + j) * shape[2];
  }
  const double* row(int i, int j) const {
    return v.data() + (static_cast<std::size_t>(i) * shape[1] + j) * shape[2];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// NaN/Inf anywhere is a contract violation of the producing op.
inline void ensure_finite(const Tensor& t, const char* where) {
  for (double x : t.v) {
    if (!std::isfinite(x)) {
      throw numeric_error(std::string("non-finite value in ") + where);
    }
  }
}

inline void ensure_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw numeric_error(std::string("non-finite value in ") + where);
    }
  }
}

}  // namespace csrnet
