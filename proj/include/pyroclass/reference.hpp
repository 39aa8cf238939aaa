#pragma once

#include "pyroclass/tensor.hpp"

// Serial, loop-for-loop reference kernels. They share no code with the
// OpenMP paths in kernels.hpp and exist for oracle tests and the benchmark.

namespace pyroclass::reference {

/// Triple-loop matrix product, accumulated in double.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Direct nested-loop stride-1 same-padded convolution of a [C,H,W] input
/// with [C',C,k,k] kernels and [C'] bias.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias);

}  // namespace pyroclass::reference
