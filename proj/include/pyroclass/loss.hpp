#pragma once

#include <span>

#include "pyroclass/tensor.hpp"

namespace pyroclass {

inline constexpr double kProbClamp = 1e-12;

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;
};

/// Mean categorical cross entropy of softmax outputs `probs` [N,K] against
/// one-hot targets. The returned gradient is taken with respect to the
/// pre-softmax logits: (probs - onehot) / N. Throws LabelError when a target
/// row is not one-hot.
template <typename T>
LossResult<T> categorical_cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& onehot);

/// Mean binary cross entropy of probabilities `p` [N] against targets in
/// {0,1}, with p clamped to [1e-12, 1-1e-12]. The gradient is with respect to
/// p. Throws LabelError for targets outside {0,1}.
template <typename T>
LossResult<T> binary_cross_entropy(const BasicTensor<T>& p, const BasicTensor<T>& y);

template <typename T>
BasicTensor<T> one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace pyroclass
