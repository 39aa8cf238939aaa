#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pyroclass/tensor.hpp"

// Forward and backward passes for the layer kinds the VGG-style family uses.
//
// Image layers accept either a single sample [C,H,W] or a batch [N,C,H,W] and
// return tensors of the same rank. Dense layers accept [F] or [N,F]. Each
// forward returns the cache its backward needs; forwards take their input by
// value so callers that no longer need an activation can move it into the
// cache instead of copying it.

namespace pyroclass {

using Rng = std::mt19937_64;

/// Uniform double in [0,1) from the top 53 bits of one generator draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
struct ConvParams {
  BasicTensor<T> kernels;  // [out, in, k, k], k in {1, 3}
  BasicTensor<T> bias;     // [out]

  std::size_t out_channels() const { return kernels.extent(0); }
  std::size_t in_channels() const { return kernels.extent(1); }
  std::size_t ksize() const { return kernels.extent(2); }
  /// Throws ShapeError unless the kernel is 3x3 or 1x1 with matching bias.
  void validate() const;

  bool operator==(const ConvParams&) const = default;
};

template <typename T>
struct DenseParams {
  BasicTensor<T> weights;  // [out, in]
  BasicTensor<T> bias;     // [out]

  std::size_t out_features() const { return weights.extent(0); }
  std::size_t in_features() const { return weights.extent(1); }
  void validate() const;

  bool operator==(const DenseParams&) const = default;
};

template <typename T>
struct ConvCache {
  BasicTensor<T> input;
};

template <typename T>
struct ConvForward {
  BasicTensor<T> output;
  ConvCache<T> cache;
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernels;
  BasicTensor<T> bias;
};

/// Stride-1 convolution with zero same-padding (pad 1 for 3x3, 0 for 1x1),
/// realized as im2col + gemm.
template <typename T>
ConvForward<T> conv2d_forward(BasicTensor<T> input, const ConvParams<T>& params);

template <typename T>
ConvGrads<T> conv2d_backward(const ConvCache<T>& cache, const ConvParams<T>& params,
                             const BasicTensor<T>& grad_output);

struct ReluCache {
  Shape shape;
  std::vector<std::uint8_t> positive;
};

template <typename T>
struct ReluForward {
  BasicTensor<T> output;
  ReluCache cache;
};

template <typename T>
ReluForward<T> relu_forward(BasicTensor<T> x);

template <typename T>
BasicTensor<T> relu_backward(const ReluCache& cache, const BasicTensor<T>& grad_y);

struct PoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index for every output element
};

template <typename T>
struct PoolForward {
  BasicTensor<T> output;
  PoolCache cache;
};

/// Non-overlapping 2x2 max pooling. Ties resolve to the first element of the
/// window in row-major order; backward routes gradient to that element.
template <typename T>
PoolForward<T> maxpool2x2_forward(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolCache& cache, const BasicTensor<T>& grad_y);

template <typename T>
struct DenseCache {
  BasicTensor<T> input;
};

template <typename T>
struct DenseForward {
  BasicTensor<T> output;
  DenseCache<T> cache;
};

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// y = W x + b.
template <typename T>
DenseForward<T> dense_forward(BasicTensor<T> x, const DenseParams<T>& params);

template <typename T>
DenseGrads<T> dense_backward(const DenseCache<T>& cache, const DenseParams<T>& params,
                             const BasicTensor<T>& grad_y);

struct DropoutCache {
  Shape shape;
  bool active = false;
  double scale = 1.0;
  std::vector<std::uint8_t> keep;
};

template <typename T>
struct DropoutForward {
  BasicTensor<T> output;
  DropoutCache cache;
};

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); at inference it is the
/// identity. Throws ConfigError unless 0 <= rate < 1.
template <typename T>
DropoutForward<T> dropout_forward(BasicTensor<T> x, double rate, Rng& rng, bool training);

template <typename T>
BasicTensor<T> dropout_backward(const DropoutCache& cache, const BasicTensor<T>& grad_y);

/// Row-wise softmax of [K] or [N,K] logits with max subtraction. Throws
/// NumericError on non-finite logits and ShapeError when K < 2.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

double sigmoid(double z);

}  // namespace pyroclass
