#include <doctest.h>

#include <random>

#include "pyroclass/error.hpp"
#include "pyroclass/kernels.hpp"
#include "pyroclass/reference.hpp"
#include "pyroclass/tensor.hpp"
#include "support.hpp"

using namespace pyroclass;

TEST_SUITE("tensor") {
  TEST_CASE("factories reject empty and zero-extent shapes") {
    CHECK_THROWS_AS(Tensor::zeros({}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({3, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
    auto t = Tensor::filled({2, 3}, 1.5f);
    CHECK(t.size() == 6);
    CHECK(t.sum() == doctest::Approx(9.0));
  }

  TEST_CASE("row-major multi-index access") {
    auto t = Tensor::zeros({2, 3, 4});
    t.at({1, 2, 3}) = 7.0f;
    CHECK(t[1 * 12 + 2 * 4 + 3] == 7.0f);
    CHECK_THROWS_AS(t.at({2, 0, 0}), ShapeError);
    CHECK_THROWS_AS(t.at({0, 0}), ShapeError);
  }

  TEST_CASE("reshape keeps data and checks element count") {
    auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto r = t.reshaped({3, 2});
    CHECK(r.shape() == Shape{3, 2});
    CHECK(r[5] == 6.0f);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  }

  TEST_CASE("slice0 and row0 address one leading index") {
    auto t = Tensor::from({3, 2}, {0, 1, 2, 3, 4, 5});
    auto s = t.slice0(1);
    CHECK(s.shape() == Shape{2});
    CHECK(s[0] == 2.0f);
    CHECK(t.row0(2)[1] == 5.0f);
  }

  TEST_CASE("cast round-trips small integers") {
    auto t = Tensor::from({3}, {1, -2, 3});
    CHECK(t.cast<double>().cast<float>() == t);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("gemm agrees with the serial triple loop for every transpose combination") {
    std::mt19937_64 rng(11);
    for (auto ta : {kernels::Trans::No, kernels::Trans::Yes}) {
      for (auto tb : {kernels::Trans::No, kernels::Trans::Yes}) {
        const std::size_t m = 7, n = 5, k = 9;
        auto a = testsupport::random_tensor({m, k}, rng);
        auto b = testsupport::random_tensor({k, n}, rng);
        const auto expect = reference::matmul(a, b);
        // store transposed copies when asked to
        auto sa = ta == kernels::Trans::Yes ? TensorD::zeros({k, m}) : a;
        auto sb = tb == kernels::Trans::Yes ? TensorD::zeros({n, k}) : b;
        if (ta == kernels::Trans::Yes) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) sa[j * m + i] = a[i * k + j];
        }
        if (tb == kernels::Trans::Yes) {
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < n; ++j) sb[j * k + i] = b[i * n + j];
        }
        auto c = TensorD::zeros({m, n});
        kernels::gemm(ta, tb, m, n, k, sa.raw(), sb.raw(), c.raw(), false);
        CHECK(max_abs_diff(c, expect) < 1e-12);
        kernels::gemm(ta, tb, m, n, k, sa.raw(), sb.raw(), c.raw(), true);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(2.0 * expect[i]));
      }
    }
  }

  TEST_CASE("matmul shape checks") {
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
    auto a = Tensor::from({1, 2}, {1, 2});
    auto b = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(a, b)[0] == 11.0f);
  }

  TEST_CASE("large parallel gemm matches reference") {
    std::mt19937_64 rng(5);
    auto a = testsupport::random_tensor({64, 300}, rng);
    auto b = testsupport::random_tensor({300, 48}, rng);
    CHECK(max_abs_diff(matmul(a, b), reference::matmul(a, b)) < 1e-10);
  }

  TEST_CASE("col2im is the adjoint of im2col") {
    std::mt19937_64 rng(3);
    const std::size_t c = 2, h = 5, w = 4, k = 3;
    auto img = testsupport::random_tensor({c, h, w}, rng);
    auto cols = testsupport::random_tensor({c * k * k, h * w}, rng);
    auto unfolded = TensorD::zeros({c * k * k, h * w});
    kernels::im2col(img.raw(), c, h, w, k, 1, unfolded.raw());
    auto folded = TensorD::zeros({c, h, w});
    kernels::col2im(cols.raw(), c, h, w, k, 1, folded.raw());
    CHECK(testsupport::dot(unfolded, cols) == doctest::Approx(testsupport::dot(img, folded)).epsilon(1e-12));
  }
}
