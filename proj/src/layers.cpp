#include "pyroclass/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pyroclass/error.hpp"
#include "pyroclass/kernels.hpp"

namespace pyroclass {

namespace {

using kernels::Trans;

struct ImageDims {
  std::size_t batch, channels, height, width;
};

template <typename T>
ImageDims image_dims(const BasicTensor<T>& t, const char* what) {
  if (t.rank() == 3) return {1, t.extent(0), t.extent(1), t.extent(2)};
  if (t.rank() == 4) return {t.extent(0), t.extent(1), t.extent(2), t.extent(3)};
  throw ShapeError(std::string(what) + " expects [C,H,W] or [N,C,H,W], got " +
                   shape_string(t.shape()));
}

Shape image_shape(bool batched, const ImageDims& d) {
  if (batched) return {d.batch, d.channels, d.height, d.width};
  return {d.channels, d.height, d.width};
}

struct RowDims {
  std::size_t batch, features;
};

template <typename T>
RowDims row_dims(const BasicTensor<T>& t, const char* what) {
  if (t.rank() == 1) return {1, t.extent(0)};
  if (t.rank() == 2) return {t.extent(0), t.extent(1)};
  throw ShapeError(std::string(what) + " expects [F] or [N,F], got " + shape_string(t.shape()));
}

}  // namespace

template <typename T>
void ConvParams<T>::validate() const {
  if (kernels.rank() != 4 || kernels.extent(2) != kernels.extent(3) ||
      (kernels.extent(2) != 3 && kernels.extent(2) != 1)) {
    throw ShapeError("conv kernels must be [out,in,3,3] or [out,in,1,1], got " +
                     shape_string(kernels.shape()));
  }
  if (bias.rank() != 1 || bias.extent(0) != kernels.extent(0)) {
    throw ShapeError("conv bias must be [out_channels]");
  }
}

template <typename T>
void DenseParams<T>::validate() const {
  if (weights.rank() != 2) throw ShapeError("dense weights must be [out,in]");
  if (bias.rank() != 1 || bias.extent(0) != weights.extent(0)) {
    throw ShapeError("dense bias must be [out_features]");
  }
}

template <typename T>
ConvForward<T> conv2d_forward(BasicTensor<T> input, const ConvParams<T>& params) {
  params.validate();
  const auto d = image_dims(input, "conv2d");
  if (d.channels != params.in_channels()) {
    throw ShapeError("conv2d input has " + std::to_string(d.channels) + " channels, kernels expect " +
                     std::to_string(params.in_channels()));
  }
  const std::size_t ks = params.ksize();
  const std::size_t pad = ks / 2;
  const std::size_t out_c = params.out_channels();
  const std::size_t plane = d.height * d.width;
  const std::size_t patch = d.channels * ks * ks;

  ImageDims od = d;
  od.channels = out_c;
  auto output = BasicTensor<T>::zeros(image_shape(input.rank() == 4, od));

  std::vector<T> columns(ks == 1 ? 0 : patch * plane);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const T* src = input.raw() + n * d.channels * plane;
    const T* col = src;
    if (ks != 1) {
      kernels::im2col(src, d.channels, d.height, d.width, ks, pad, columns.data());
      col = columns.data();
    }
    T* dst = output.raw() + n * out_c * plane;
    kernels::gemm(Trans::No, Trans::No, out_c, plane, patch, params.kernels.raw(), col, dst, false);
    for (std::size_t c = 0; c < out_c; ++c) {
      const T b = params.bias[c];
      T* row = dst + c * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] += b;
    }
  }
  return {std::move(output), ConvCache<T>{std::move(input)}};
}

template <typename T>
ConvGrads<T> conv2d_backward(const ConvCache<T>& cache, const ConvParams<T>& params,
                             const BasicTensor<T>& grad_output) {
  params.validate();
  const auto d = image_dims(cache.input, "conv2d_backward");
  const std::size_t ks = params.ksize();
  const std::size_t pad = ks / 2;
  const std::size_t out_c = params.out_channels();
  const std::size_t plane = d.height * d.width;
  const std::size_t patch = d.channels * ks * ks;

  ImageDims od = d;
  od.channels = out_c;
  if (grad_output.shape() != image_shape(cache.input.rank() == 4, od)) {
    throw ShapeError("conv2d_backward grad_output shape " + shape_string(grad_output.shape()) +
                     " does not match forward output");
  }

  ConvGrads<T> g{BasicTensor<T>::zeros(cache.input.shape()),
                 BasicTensor<T>::zeros(params.kernels.shape()),
                 BasicTensor<T>::zeros(params.bias.shape())};

  std::vector<T> columns(ks == 1 ? 0 : patch * plane);
  std::vector<T> grad_columns(patch * plane);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const T* src = cache.input.raw() + n * d.channels * plane;
    const T* col = src;
    if (ks != 1) {
      kernels::im2col(src, d.channels, d.height, d.width, ks, pad, columns.data());
      col = columns.data();
    }
    const T* go = grad_output.raw() + n * out_c * plane;
    // dK += dY * col^T
    kernels::gemm(Trans::No, Trans::Yes, out_c, patch, plane, go, col, g.kernels.raw(), true);
    // dcol = K^T * dY
    T* gi = g.input.raw() + n * d.channels * plane;
    if (ks == 1) {
      kernels::gemm(Trans::Yes, Trans::No, patch, plane, out_c, params.kernels.raw(), go, gi, false);
    } else {
      kernels::gemm(Trans::Yes, Trans::No, patch, plane, out_c, params.kernels.raw(), go,
                    grad_columns.data(), false);
      kernels::col2im(grad_columns.data(), d.channels, d.height, d.width, ks, pad, gi);
    }
    for (std::size_t c = 0; c < out_c; ++c) {
      T acc = 0;
      const T* row = go + c * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += row[i];
      g.bias[c] += acc;
    }
  }
  return g;
}

template <typename T>
ReluForward<T> relu_forward(BasicTensor<T> x) {
  ReluCache cache{x.shape(), std::vector<std::uint8_t>(x.size())};
  auto data = x.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool pos = data[i] > T(0);
    cache.positive[i] = pos;
    if (!pos) data[i] = T(0);
  }
  return {std::move(x), std::move(cache)};
}

template <typename T>
BasicTensor<T> relu_backward(const ReluCache& cache, const BasicTensor<T>& grad_y) {
  if (grad_y.shape() != cache.shape) throw ShapeError("relu_backward shape mismatch");
  auto gx = grad_y;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    if (!cache.positive[i]) gx[i] = T(0);
  }
  return gx;
}

template <typename T>
PoolForward<T> maxpool2x2_forward(const BasicTensor<T>& x) {
  const auto d = image_dims(x, "maxpool2x2");
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    throw ShapeError("maxpool2x2 needs even spatial extents, got " + shape_string(x.shape()));
  }
  ImageDims od{d.batch, d.channels, d.height / 2, d.width / 2};
  auto y = BasicTensor<T>::zeros(image_shape(x.rank() == 4, od));
  PoolCache cache{x.shape(), std::vector<std::size_t>(y.size())};

  const std::size_t planes = d.batch * d.channels;
  const T* in = x.raw();
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t in_base = p * d.height * d.width;
    const std::size_t out_base = p * od.height * od.width;
    for (std::size_t oy = 0; oy < od.height; ++oy) {
      for (std::size_t ox = 0; ox < od.width; ++ox) {
        std::size_t best = in_base + (2 * oy) * d.width + 2 * ox;
        for (std::size_t k = 1; k < 4; ++k) {
          const std::size_t idx = in_base + (2 * oy + k / 2) * d.width + 2 * ox + k % 2;
          if (in[idx] > in[best]) best = idx;  // strict: earlier element wins ties
        }
        const std::size_t o = out_base + oy * od.width + ox;
        y[o] = in[best];
        cache.argmax[o] = best;
      }
    }
  }
  return {std::move(y), std::move(cache)};
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolCache& cache, const BasicTensor<T>& grad_y) {
  if (grad_y.size() != cache.argmax.size()) throw ShapeError("maxpool2x2_backward shape mismatch");
  auto gx = BasicTensor<T>::zeros(cache.input_shape);
  for (std::size_t o = 0; o < cache.argmax.size(); ++o) gx[cache.argmax[o]] += grad_y[o];
  return gx;
}

template <typename T>
DenseForward<T> dense_forward(BasicTensor<T> x, const DenseParams<T>& params) {
  params.validate();
  const auto d = row_dims(x, "dense");
  if (d.features != params.in_features()) {
    throw ShapeError("dense input has " + std::to_string(d.features) + " features, layer expects " +
                     std::to_string(params.in_features()));
  }
  const std::size_t out = params.out_features();
  auto y = x.rank() == 2 ? BasicTensor<T>::zeros({d.batch, out}) : BasicTensor<T>::zeros({out});
  kernels::gemm(Trans::No, Trans::Yes, d.batch, out, d.features, x.raw(), params.weights.raw(),
                y.raw(), false);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t j = 0; j < out; ++j) y[n * out + j] += params.bias[j];
  }
  return {std::move(y), DenseCache<T>{std::move(x)}};
}

template <typename T>
DenseGrads<T> dense_backward(const DenseCache<T>& cache, const DenseParams<T>& params,
                             const BasicTensor<T>& grad_y) {
  params.validate();
  const auto d = row_dims(cache.input, "dense_backward");
  const std::size_t out = params.out_features();
  if (grad_y.size() != d.batch * out || grad_y.rank() != cache.input.rank()) {
    throw ShapeError("dense_backward grad_y shape " + shape_string(grad_y.shape()) +
                     " does not match forward output");
  }
  DenseGrads<T> g{BasicTensor<T>::zeros(cache.input.shape()),
                  BasicTensor<T>::zeros(params.weights.shape()),
                  BasicTensor<T>::zeros(params.bias.shape())};
  kernels::gemm(Trans::No, Trans::No, d.batch, d.features, out, grad_y.raw(), params.weights.raw(),
                g.input.raw(), false);
  kernels::gemm(Trans::Yes, Trans::No, out, d.features, d.batch, grad_y.raw(), cache.input.raw(),
                g.weights.raw(), false);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t j = 0; j < out; ++j) g.bias[j] += grad_y[n * out + j];
  }
  return g;
}

template <typename T>
DropoutForward<T> dropout_forward(BasicTensor<T> x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  DropoutCache cache{x.shape(), training && rate > 0.0, 1.0, {}};
  if (!cache.active) return {std::move(x), std::move(cache)};

  cache.scale = 1.0 / (1.0 - rate);
  cache.keep.resize(x.size());
  const T scale = static_cast<T>(cache.scale);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = uniform01(rng) >= rate;
    cache.keep[i] = keep;
    x[i] = keep ? x[i] * scale : T(0);
  }
  return {std::move(x), std::move(cache)};
}

template <typename T>
BasicTensor<T> dropout_backward(const DropoutCache& cache, const BasicTensor<T>& grad_y) {
  if (grad_y.shape() != cache.shape) throw ShapeError("dropout_backward shape mismatch");
  if (!cache.active) return grad_y;
  auto gx = grad_y;
  const T scale = static_cast<T>(cache.scale);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = cache.keep[i] ? gx[i] * scale : T(0);
  return gx;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const auto d = row_dims(logits, "softmax");
  if (d.features < 2) throw ShapeError("softmax needs at least 2 classes");
  auto out = logits;
  for (std::size_t n = 0; n < d.batch; ++n) {
    T* row = out.raw() + n * d.features;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < d.features; ++k) {
      if (!std::isfinite(row[k])) throw NumericError("softmax received a non-finite logit");
      mx = std::max(mx, row[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < d.features; ++k) {
      row[k] = static_cast<T>(std::exp(static_cast<double>(row[k] - mx)));
      total += row[k];
    }
    for (std::size_t k = 0; k < d.features; ++k) row[k] = static_cast<T>(row[k] / total);
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

#define PYROCLASS_INSTANTIATE_LAYERS(T)                                                       \
  template struct ConvParams<T>;                                                              \
  template struct DenseParams<T>;                                                             \
  template ConvForward<T> conv2d_forward(BasicTensor<T>, const ConvParams<T>&);               \
  template ConvGrads<T> conv2d_backward(const ConvCache<T>&, const ConvParams<T>&,            \
                                        const BasicTensor<T>&);                               \
  template ReluForward<T> relu_forward(BasicTensor<T>);                                       \
  template BasicTensor<T> relu_backward(const ReluCache&, const BasicTensor<T>&);             \
  template PoolForward<T> maxpool2x2_forward(const BasicTensor<T>&);                          \
  template BasicTensor<T> maxpool2x2_backward(const PoolCache&, const BasicTensor<T>&);       \
  template DenseForward<T> dense_forward(BasicTensor<T>, const DenseParams<T>&);              \
  template DenseGrads<T> dense_backward(const DenseCache<T>&, const DenseParams<T>&,          \
                                        const BasicTensor<T>&);                               \
  template DropoutForward<T> dropout_forward(BasicTensor<T>, double, Rng&, bool);             \
  template BasicTensor<T> dropout_backward(const DropoutCache&, const BasicTensor<T>&);       \
  template BasicTensor<T> softmax(const BasicTensor<T>&);

PYROCLASS_INSTANTIATE_LAYERS(float)
PYROCLASS_INSTANTIATE_LAYERS(double)

#undef PYROCLASS_INSTANTIATE_LAYERS

}  // namespace pyroclass
