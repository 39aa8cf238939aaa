#pragma once

// Independent helpers for the test suites: finite differences, brute-force
// recounts and small fixture builders. Nothing here calls into the code under
// test except to evaluate the function being probed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pyroclass/tensor.hpp"

namespace testsupport {

using pyroclass::TensorD;

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline TensorD random_tensor(pyroclass::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  auto t = TensorD::zeros(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Central difference of f with respect to every entry of x (x is restored).
inline TensorD numeric_grad(const std::function<double()>& f, TensorD& x, double eps = 1e-6) {
  auto g = TensorD::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f();
    x[i] = keep - eps;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// Largest relative error between analytic and numeric gradients.
inline double max_rel_err(const TensorD& analytic, const TensorD& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  return worst;
}

inline double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Mean silhouette coefficient of 2-D points under Euclidean distance.
inline double silhouette(const std::vector<double>& xy, const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = 0.0, other = 0.0;
    std::size_t ns = 0, no = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::hypot(xy[2 * i] - xy[2 * j], xy[2 * i + 1] - xy[2 * j + 1]);
      if (labels[i] == labels[j]) {
        same += d;
        ++ns;
      } else {
        other += d;
        ++no;
      }
    }
    const double a = ns ? same / static_cast<double>(ns) : 0.0;
    const double b = no ? other / static_cast<double>(no) : 0.0;
    total += ns ? (b - a) / std::max(a, b) : 0.0;
  }
  return total / static_cast<double>(n);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pyroclass_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
