#include <doctest.h>

#include "gradcheck.hpp"
#include "pyroclass/error.hpp"
#include "pyroclass/model.hpp"

using namespace pyroclass;

namespace {

// Parameter count written out from the section layout, independent of plan_layers.
std::size_t expected_params(const ModelConfig& c) {
  const std::size_t widths[5] = {1, 2, 4, 8, 8};
  const int convs[5] = {2, 2, 3, 3, 3};
  std::size_t total = 0, in = 1, side = c.input_size;
  for (int s = 0; s < c.depth; ++s) {
    const std::size_t out = c.base_width * widths[s];
    for (int i = 0; i < convs[s]; ++i) {
      total += out * in * 9 + out;
      in = out;
    }
    side /= 2;
  }
  const std::size_t head = 25088 / ((224 >> c.depth) * (224 >> c.depth));
  total += head * in + head;
  const std::size_t flat = head * side * side;
  total += c.dense_width * flat + c.dense_width;
  total += c.dense_width * c.dense_width + c.dense_width;
  total += c.num_classes * c.dense_width + c.num_classes;
  return total;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("head channels keep the flattened size at 25088") {
    const std::size_t expect[5] = {2, 8, 32, 128, 512};
    for (int d = 1; d <= 5; ++d) {
      CHECK(head_channels(d) == expect[d - 1]);
      for (Task t : {Task::Objects, Task::Poses, Task::Fire}) {
        CHECK(flatten_size(ModelConfig::make(t, d)) == 25088);
      }
    }
    CHECK_THROWS_WITH_AS(head_channels(6), "depth must be 1..5, got 6", ConfigError);
    CHECK_THROWS_AS(head_channels(0), ConfigError);
  }

  TEST_CASE("parameter counts") {
    CHECK(param_count(ModelConfig::make(Task::Objects, 1)) == 119604039);
    for (int d = 1; d <= 5; ++d) {
      for (Task t : {Task::Objects, Task::Poses, Task::Fire}) {
        CHECK(param_count(ModelConfig::make(t, d)) == expected_params(ModelConfig::make(t, d)));
        CHECK(param_count(ModelConfig::tiny(t, d)) == expected_params(ModelConfig::tiny(t, d)));
      }
    }
  }

  TEST_CASE("plan shapes for depth 2") {
    const auto plan = plan_layers(ModelConfig::make(Task::Poses, 2));
    // conv relu conv relu pool conv relu conv relu pool head flatten dense relu drop dense relu drop dense softmax
    REQUIRE(plan.size() == 20);
    CHECK(plan[4].output_shape == Shape{64, 112, 112});
    CHECK(plan[9].output_shape == Shape{128, 56, 56});
    CHECK(plan[10].output_shape == Shape{8, 56, 56});
    CHECK(plan[11].out == 25088);
    CHECK(plan[18].out == 3);
  }

  TEST_CASE("config validation") {
    auto c = ModelConfig::make(Task::Fire, 3);
    c.num_classes = 5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig::make(Task::Fire, 3);
    c.input_size = 20;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(parse_task("smoke"), ConfigError);
    CHECK(parse_task("fire") == Task::Fire);
  }

  TEST_CASE("tiny forward pass shapes and score rows") {
    for (int d = 1; d <= 5; ++d) {
      const auto c = ModelConfig::tiny(Task::Objects, d);
      const auto m = build_model(c, 7);
      CHECK(param_count(m) == param_count(c));
      auto scores = predict(m, Tensor::filled({3, 1, c.input_size, c.input_size}, 0.5f));
      CHECK(scores.shape() == Shape{3, 5});
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < 5; ++k) s += scores[r * 5 + k];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
      CHECK_THROWS_AS(predict(m, Tensor::zeros({1, 1, c.input_size + 2, c.input_size + 2})), ShapeError);
    }
  }

  TEST_CASE("initialization is seeded") {
    const auto c = ModelConfig::tiny(Task::Poses, 2);
    CHECK(build_model(c, 3) == build_model(c, 3));
    CHECK_FALSE(build_model(c, 3) == build_model(c, 4));
  }

  TEST_CASE("forward_from a captured activation reproduces the logits") {
    const auto c = ModelConfig::tiny(Task::Objects, 3);
    const auto m = build_model(c, 1);
    Rng rng(2);
    auto x = Tensor::zeros({2, 1, c.input_size, c.input_size});
    for (auto& v : x.data()) v = static_cast<float>(uniform01(rng));
    for (std::size_t layer : {m.head_conv_index(), m.last_conv3x3_index()}) {
      ForwardOptions opts;
      opts.capture_layer = layer;
      auto fwd = forward(m, x, opts);
      CHECK(forward_from(m, layer, fwd.captured) == fwd.logits);
    }
  }

  TEST_CASE("argmax ties go to the lowest index") {
    const std::vector<double> s{0.2, 0.4, 0.4};
    CHECK(argmax_first(s) == 1);
  }

  TEST_CASE("whole tiny model matches finite differences") {
    for (int d = 1; d <= 5; ++d) {
      CHECK(gradcheck::model(ModelConfig::tiny(Task::Objects, d), 10 + d) < 1e-3);
    }
    CHECK(gradcheck::model(ModelConfig::tiny(Task::Fire, 2), 3) < 1e-3);
  }
}
