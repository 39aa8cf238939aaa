#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "pyroclass/error.hpp"
#include "pyroclass/reference.hpp"

using namespace pyroclass;

TEST_SUITE("layers") {
  TEST_CASE("conv forward matches the nested-loop reference") {
    std::mt19937_64 rng(2);
    for (std::size_t k : {1u, 3u}) {
      auto x = testsupport::random_tensor({3, 6, 5}, rng);
      ConvParams<double> p{testsupport::random_tensor({4, 3, k, k}, rng), testsupport::random_tensor({4}, rng)};
      CHECK(max_abs_diff(conv2d_forward(x, p).output, reference::conv2d(x, p.kernels, p.bias)) < 1e-12);
    }
  }

  TEST_CASE("conv of a constant image with an averaging kernel") {
    // interior pixels see 9 ones, corners 4, edges 6 under zero padding
    ConvParams<float> p{Tensor::filled({1, 1, 3, 3}, 1.0f), Tensor::zeros({1})};
    auto y = conv2d_forward(Tensor::filled({1, 4, 4}, 1.0f), p).output;
    CHECK(y.at({0, 0, 0}) == 4.0f);
    CHECK(y.at({0, 0, 1}) == 6.0f);
    CHECK(y.at({0, 1, 1}) == 9.0f);
  }

  TEST_CASE("conv rejects bad kernels and channel mismatch") {
    ConvParams<float> bad{Tensor::zeros({2, 1, 2, 2}), Tensor::zeros({2})};
    CHECK_THROWS_AS(conv2d_forward(Tensor::zeros({1, 4, 4}), bad), ShapeError);
    ConvParams<float> p{Tensor::zeros({2, 3, 3, 3}), Tensor::zeros({2})};
    CHECK_THROWS_AS(conv2d_forward(Tensor::zeros({1, 4, 4}), p), ShapeError);
  }

  TEST_CASE("max pool picks the first of tied maxima") {
    auto x = Tensor::from({1, 2, 2}, {5, 5, 5, 5});
    auto f = maxpool2x2_forward(x);
    CHECK(f.output[0] == 5.0f);
    auto g = maxpool2x2_backward<float>(f.cache, Tensor::filled({1, 1, 1}, 1.0f));
    CHECK(g[0] == 1.0f);
    CHECK(g[1] == 0.0f);
    CHECK(g[3] == 0.0f);
    CHECK_THROWS_AS(maxpool2x2_forward(Tensor::zeros({1, 3, 4})), ShapeError);
  }

  TEST_CASE("dropout is the identity at inference and unbiased in training") {
    Rng rng(4);
    auto x = Tensor::filled({1000}, 1.0f);
    auto inf = dropout_forward(x, 0.5, rng, false);
    CHECK(inf.output == x);
    auto tr = dropout_forward(x, 0.5, rng, true);
    std::size_t zeros = 0;
    for (float v : tr.output.data()) {
      CHECK((v == 0.0f || v == 2.0f));
      zeros += v == 0.0f;
    }
    CHECK(zeros > 400);
    CHECK(zeros < 600);
    CHECK_THROWS_AS(dropout_forward(x, 1.0, rng, true), ConfigError);
  }

  TEST_CASE("softmax rows sum to one and survive large logits") {
    auto z = Tensor::from({2, 3}, {1000, 1001, 1002, -5, 0, 5});
    auto p = softmax(z);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(p[r * 3] + p[r * 3 + 1] + p[r * 3 + 2] == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(p[2] > p[1]);
    CHECK_THROWS_AS(softmax(Tensor::from({2}, {1.0f, NAN})), NumericError);
    CHECK_THROWS_AS(softmax(Tensor::zeros({3, 1})), ShapeError);
  }

  TEST_CASE("finite-difference gradients of every layer") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      CHECK(gradcheck::conv(3, seed) < 1e-4);
      CHECK(gradcheck::conv(1, seed) < 1e-4);
      CHECK(gradcheck::relu(seed) < 1e-4);
      CHECK(gradcheck::maxpool(seed) < 1e-4);
      CHECK(gradcheck::dense(seed) < 1e-4);
      CHECK(gradcheck::dropout(seed) < 1e-4);
    }
  }
}

TEST_SUITE("loss") {
  TEST_CASE("cross entropy reference values") {
    auto perfect = categorical_cross_entropy(Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {1, 0}));
    CHECK(perfect.loss == doctest::Approx(0.0));
    auto uniform = categorical_cross_entropy(Tensor::filled({2, 5}, 0.2f), one_hot<float>(std::vector<int>{1, 4}, 5));
    CHECK(uniform.loss == doctest::Approx(std::log(5.0)).epsilon(1e-6));
    CHECK_THROWS_AS(categorical_cross_entropy(Tensor::filled({1, 2}, 0.5f), Tensor::filled({1, 2}, 1.0f)),
                    LabelError);
  }

  TEST_CASE("binary cross entropy reference values") {
    auto exact = binary_cross_entropy(TensorD::from({2}, {1, 0}), TensorD::from({2}, {1, 0}));
    CHECK(exact.loss < 1e-10);
    auto half = binary_cross_entropy(TensorD::filled({3}, 0.5), TensorD::from({3}, {0, 1, 1}));
    CHECK(half.loss == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(binary_cross_entropy(TensorD::filled({1}, 0.5), TensorD::filled({1}, 0.5)), LabelError);
  }

  TEST_CASE("fused softmax and loss gradients match finite differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      CHECK(gradcheck::softmax_ce(seed) < 1e-4);
      CHECK(gradcheck::bce(seed) < 1e-4);
      CHECK(gradcheck::binary_head(seed) < 1e-4);
    }
  }
}
