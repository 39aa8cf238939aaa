#include "pyroclass/loss.hpp"

#include <algorithm>
#include <cmath>

#include "pyroclass/error.hpp"

namespace pyroclass {

template <typename T>
LossResult<T> categorical_cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& onehot) {
  if (probs.rank() != 2 || probs.shape() != onehot.shape()) {
    throw ShapeError("categorical_cross_entropy expects matching [N,K] tensors");
  }
  const std::size_t n = probs.extent(0), k = probs.extent(1);
  LossResult<T> r{0.0, BasicTensor<T>::zeros(probs.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0, target = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T v = onehot[i * k + j];
      if (v == T(1)) {
        ++ones;
        target = j;
      } else if (v != T(0)) {
        ones = 2;
      }
    }
    if (ones != 1) throw LabelError("target row " + std::to_string(i) + " is not one-hot");
    const double p = std::max(static_cast<double>(probs[i * k + target]), kProbClamp);
    r.loss -= std::log(p);
    for (std::size_t j = 0; j < k; ++j) {
      r.grad[i * k + j] = static_cast<T>((static_cast<double>(probs[i * k + j]) -
                                          static_cast<double>(onehot[i * k + j])) /
                                         static_cast<double>(n));
    }
  }
  r.loss /= static_cast<double>(n);
  return r;
}

template <typename T>
LossResult<T> binary_cross_entropy(const BasicTensor<T>& p, const BasicTensor<T>& y) {
  if (p.rank() != 1 || p.shape() != y.shape()) {
    throw ShapeError("binary_cross_entropy expects matching [N] tensors");
  }
  const std::size_t n = p.size();
  LossResult<T> r{0.0, BasicTensor<T>::zeros(p.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(y[i]);
    if (t != 0.0 && t != 1.0) throw LabelError("binary target " + std::to_string(i) + " is not 0 or 1");
    const double q = std::clamp(static_cast<double>(p[i]), kProbClamp, 1.0 - kProbClamp);
    r.loss -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
    r.grad[i] = static_cast<T>(-(t / q - (1.0 - t) / (1.0 - q)) / static_cast<double>(n));
  }
  r.loss /= static_cast<double>(n);
  return r;
}

template <typename T>
BasicTensor<T> one_hot(std::span<const int> labels, std::size_t classes) {
  auto t = BasicTensor<T>::zeros({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw LabelError("label " + std::to_string(labels[i]) + " out of range");
    }
    t[i * classes + static_cast<std::size_t>(labels[i])] = T(1);
  }
  return t;
}

template LossResult<float> categorical_cross_entropy(const BasicTensor<float>&, const BasicTensor<float>&);
template LossResult<double> categorical_cross_entropy(const BasicTensor<double>&, const BasicTensor<double>&);
template LossResult<float> binary_cross_entropy(const BasicTensor<float>&, const BasicTensor<float>&);
template LossResult<double> binary_cross_entropy(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> one_hot(std::span<const int>, std::size_t);
template BasicTensor<double> one_hot(std::span<const int>, std::size_t);

}  // namespace pyroclass
