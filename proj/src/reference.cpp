#include "pyroclass/reference.hpp"

#include "pyroclass/error.hpp"

namespace pyroclass::reference {

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("reference::matmul shape mismatch");
  }
  const auto m = a.extent(0), k = a.extent(1), n = b.extent(1);
  auto c = BasicTensor<T>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * n + j]);
      }
      c[i * n + j] = static_cast<T>(acc);
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias) {
  if (input.rank() != 3 || kernels.rank() != 4 || kernels.extent(1) != input.extent(0)) {
    throw ShapeError("reference::conv2d shape mismatch");
  }
  const long in_c = static_cast<long>(input.extent(0));
  const long h = static_cast<long>(input.extent(1));
  const long w = static_cast<long>(input.extent(2));
  const long out_c = static_cast<long>(kernels.extent(0));
  const long ks = static_cast<long>(kernels.extent(2));
  const long pad = ks / 2;

  auto out = BasicTensor<T>::zeros({static_cast<std::size_t>(out_c), static_cast<std::size_t>(h),
                                    static_cast<std::size_t>(w)});
  for (long oc = 0; oc < out_c; ++oc) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = static_cast<double>(bias[static_cast<std::size_t>(oc)]);
        for (long ic = 0; ic < in_c; ++ic) {
          for (long ky = 0; ky < ks; ++ky) {
            for (long kx = 0; kx < ks; ++kx) {
              const long sy = y + ky - pad;
              const long sx = x + kx - pad;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              const auto kidx = static_cast<std::size_t>(((oc * in_c + ic) * ks + ky) * ks + kx);
              const auto iidx = static_cast<std::size_t>((ic * h + sy) * w + sx);
              acc += static_cast<double>(kernels[kidx]) * static_cast<double>(input[iidx]);
            }
          }
        }
        out[static_cast<std::size_t>((oc * h + y) * w + x)] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template BasicTensor<float> matmul(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> matmul(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> conv2d(const BasicTensor<float>&, const BasicTensor<float>&,
                                   const BasicTensor<float>&);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const BasicTensor<double>&,
                                    const BasicTensor<double>&);

}  // namespace pyroclass::reference
