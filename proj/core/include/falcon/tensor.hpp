#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "falcon/error.hpp"

namespace falcon::nn {

// Dense row-major tensor of doubles. Training runs in double precision so
// finite-difference gradient checks stay meaningful.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

  Tensor(std::initializer_list<std::size_t> s)
      : shape(s), data(numel_of(shape), 0.0) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return data.size(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  void require_shape(const std::vector<std::size_t>& s, const char* what) const {
    if (shape != s) fail(errc::shape_mismatch, what);
  }
};

inline void require(bool cond, errc code, const char* msg) {
  if (!cond) fail(code, msg);
}

}  // namespace falcon::nn
