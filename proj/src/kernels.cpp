#include "pyroclass/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace pyroclass::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  const bool parallel = m > 1 && m * n * k >= kParallelWork;
  const auto rows = static_cast<std::int64_t>(m);

  if (trans_b == Trans::No) {
    // Row i of C is a linear combination of rows of B: stream B contiguously.
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      T* ci = c + i * n;
      if (!accumulate) std::fill(ci, ci + n, T(0));
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = trans_a == Trans::No ? a[i * k + p] : a[p * m + i];
        if (aip == T(0)) continue;
        const T* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
    return;
  }

  // B transposed: C[i,j] is a dot product of row i of op(A) with row j of B.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    T* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = 0;
      if (trans_a == Trans::No) {
        const T* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      } else {
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * bj[p];
      }
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t ksize, std::size_t pad, T* columns) {
  const std::size_t plane = height * width;
  const auto rows = static_cast<std::int64_t>(channels * ksize * ksize);
#pragma omp parallel for schedule(static) if (rows * plane >= kParallelWork)
  for (std::int64_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const std::size_t ch = r / (ksize * ksize);
    const std::size_t ky = (r / ksize) % ksize;
    const std::size_t kx = r % ksize;
    const T* src = image + ch * plane;
    T* dst = columns + r * plane;
    for (std::size_t y = 0; y < height; ++y) {
      const auto sy = static_cast<std::int64_t>(y + ky) - static_cast<std::int64_t>(pad);
      T* out = dst + y * width;
      if (sy < 0 || sy >= static_cast<std::int64_t>(height)) {
        std::fill(out, out + width, T(0));
        continue;
      }
      const T* in = src + static_cast<std::size_t>(sy) * width;
      for (std::size_t x = 0; x < width; ++x) {
        const auto sx = static_cast<std::int64_t>(x + kx) - static_cast<std::int64_t>(pad);
        out[x] = (sx < 0 || sx >= static_cast<std::int64_t>(width)) ? T(0) : in[sx];
      }
    }
  }
}

template <typename T>
void col2im(const T* columns, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t ksize, std::size_t pad, T* image) {
  const std::size_t plane = height * width;
  const std::size_t taps = ksize * ksize;
  // Parallel over channels: each channel plane is written by one thread only.
  const auto chans = static_cast<std::int64_t>(channels);
#pragma omp parallel for schedule(static) if (channels * taps * plane >= kParallelWork)
  for (std::int64_t cc = 0; cc < chans; ++cc) {
    const auto ch = static_cast<std::size_t>(cc);
    T* dst = image + ch * plane;
    for (std::size_t t = 0; t < taps; ++t) {
      const std::size_t ky = t / ksize;
      const std::size_t kx = t % ksize;
      const T* src = columns + (ch * taps + t) * plane;
      for (std::size_t y = 0; y < height; ++y) {
        const auto sy = static_cast<std::int64_t>(y + ky) - static_cast<std::int64_t>(pad);
        if (sy < 0 || sy >= static_cast<std::int64_t>(height)) continue;
        T* row = dst + static_cast<std::size_t>(sy) * width;
        const T* in = src + y * width;
        for (std::size_t x = 0; x < width; ++x) {
          const auto sx = static_cast<std::int64_t>(x + kx) - static_cast<std::int64_t>(pad);
          if (sx < 0 || sx >= static_cast<std::int64_t>(width)) continue;
          row[sx] += in[x];
        }
      }
    }
  }
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);
template void im2col<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            std::size_t, float*);
template void im2col<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             std::size_t, double*);
template void col2im<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            std::size_t, float*);
template void col2im<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             std::size_t, double*);

}  // namespace pyroclass::kernels
