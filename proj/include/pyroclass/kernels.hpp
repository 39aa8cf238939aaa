#pragma once

#include <cstddef>

// OpenMP-parallel numeric kernels. Each output element is produced by exactly
// one thread with a fixed summation order, so results do not depend on the
// thread count. Serial reference versions live in reference.hpp.

namespace pyroclass::kernels {

enum class Trans { No, Yes };

/// C[m,n] (+)= op(A) op(B) on row-major buffers, where op(A) is [m,k] and
/// op(B) is [k,n]. With Trans::Yes the stored matrix is the transpose
/// ([k,m] for A, [n,k] for B). `accumulate` adds into C instead of
/// overwriting it.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

/// Unfolds a [channels, height, width] image into a
/// [channels*ksize*ksize, height*width] patch matrix for a stride-1
/// convolution with `pad` zero padding and same-size output.
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t ksize, std::size_t pad, T* columns);

/// Adjoint of im2col: accumulates patch-matrix entries back into the image.
template <typename T>
void col2im(const T* columns, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t ksize, std::size_t pad, T* image);

}  // namespace pyroclass::kernels
