#include <doctest.h>

#include <cmath>
#include <limits>

#include "pyroclass/checkpoint.hpp"
#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"
#include "pyroclass/synthetic.hpp"
#include "pyroclass/trainer.hpp"
#include "support.hpp"

using namespace pyroclass;

namespace {

// Two classes that differ only in overall brightness.
LabeledImages brightness_set(std::size_t per_class, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  LabeledImages d{Tensor::zeros({2 * per_class, 1, size, size}), std::vector<int>(2 * per_class)};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    for (auto& v : d.images.row0(i)) v = static_cast<float>((label == 0 ? 0.8 : 0.2) + 0.1 * (uniform01(rng) - 0.5));
    d.labels[i] = label;
  }
  return d;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("inverse-time learning rate") {
    TrainConfig c;
    CHECK(learning_rate(c, 0, 0) == 1e-4);
    CHECK(learning_rate(c, 1000, 0) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(learning_rate(c, 10, 0) < learning_rate(c, 9, 0));
    c.decay_mode = DecayMode::PerEpoch;
    CHECK(learning_rate(c, 1000, 0) == 1e-4);
    CHECK(learning_rate(c, 0, 1000) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(parse_decay_mode("per-epoch") == DecayMode::PerEpoch);
    CHECK_THROWS_AS(parse_decay_mode("step"), ConfigError);
  }

  TEST_CASE("sgd step moves against the gradient by exactly lr * grad") {
    // loss (w - 3)^2 at w = 1 has gradient -4
    auto w = TensorD::from({1}, {1.0});
    sgd_step(w, TensorD::from({1}, {-4.0}), 0.25);
    CHECK(w[0] == 2.0);
    auto zero = TensorD::zeros({3});
    auto p = TensorD::from({3}, {1, 2, 3});
    sgd_step(p, zero, 0.1);
    CHECK(p == TensorD::from({3}, {1, 2, 3}));
    CHECK_THROWS_AS(sgd_step(p, TensorD::zeros({2}), 0.1), ShapeError);
  }

  TEST_CASE("early stopping rule") {
    EarlyStopping es(1, 1e-4);
    CHECK(es.update(1, 1.0));
    CHECK_FALSE(es.should_stop());
    CHECK_FALSE(es.update(2, 1.1));
    CHECK(es.should_stop());
    CHECK(es.best_epoch() == 1);

    EarlyStopping small(2, 1e-4);
    small.update(1, 1.0);
    CHECK_FALSE(small.update(2, 0.99995));  // below min_delta
    CHECK(small.update(3, 0.9));
    CHECK(small.best_epoch() == 3);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    c.base_lr = 0;
    CHECK_THROWS_AS(c.validate(5), ConfigError);
    c = TrainConfig::for_task(Task::Fire);
    CHECK(c.loss == LossKind::Binary);
    CHECK_NOTHROW(c.validate(2));
    CHECK_THROWS_AS(c.validate(3), ConfigError);
  }

  TEST_CASE("training is deterministic and returns the best epoch") {
    const auto data = brightness_set(8, 8, 1);
    auto mc = ModelConfig::tiny(Task::Fire, 1);
    mc.input_size = 8;
    TrainConfig tc = TrainConfig::for_task(Task::Fire);
    tc.batch_size = 4;
    tc.max_epochs = 6;
    tc.base_lr = 0.01;
    tc.seed = 5;
    const auto a = train(build_model(mc, 5), data, data, tc);
    const auto b = train(build_model(mc, 5), data, data, tc);
    CHECK(a.report == b.report);
    CHECK(a.model == b.model);
    CHECK(a.report.train_loss.size() == static_cast<std::size_t>(a.report.stopped_epoch));
    CHECK(a.report.best_epoch <= a.report.stopped_epoch);
    const auto& vl = a.report.val_loss;
    const double best = *std::min_element(vl.begin(), vl.end());
    CHECK(vl[static_cast<std::size_t>(a.report.best_epoch - 1)] <= best + 1e-4);
    CHECK(evaluate(a.model, data, tc.loss).loss == doctest::Approx(vl[static_cast<std::size_t>(a.report.best_epoch - 1)]));
    CHECK(a.model.step > 0);
  }

  TEST_CASE("report JSON has the documented keys") {
    TrainReport r;
    r.train_loss = {1.0};
    r.val_loss = {0.5};
    r.val_acc = {0.25};
    r.best_epoch = 1;
    r.stopped_epoch = 1;
    r.seed = 9;
    const auto j = r.to_json();
    for (const char* key : {"train_loss", "val_loss", "val_acc", "best_epoch", "stopped_epoch", "seed"}) {
      CHECK(j.find(std::string("\"") + key + "\"") != std::string::npos);
    }
  }

  TEST_CASE("a huge learning rate diverges with the epoch attached") {
    const auto data = brightness_set(4, 8, 2);
    auto mc = ModelConfig::tiny(Task::Fire, 1);
    mc.input_size = 8;
    TrainConfig tc = TrainConfig::for_task(Task::Fire);
    tc.base_lr = 1e30;
    tc.max_epochs = 5;
    try {
      train(build_model(mc, 1), data, data, tc);
      FAIL("expected divergence");
    } catch (const TrainingDivergedError& e) {
      CHECK(e.epoch() >= 1);
    }
  }

  TEST_CASE("cross validation on a separable toy set") {
    const auto dir = testsupport::scratch_dir("crossval");
    std::vector<SampleRecord> rs;
    for (int i = 0; i < 12; ++i) {
      GrayImage img{8, 8, std::vector<std::uint8_t>(64, i % 2 ? 40 : 220)};
      const auto path = dir / ("i" + std::to_string(i) + ".pgm");
      write_pgm(path, img);
      rs.push_back({path.string(), i % 2 ? "no-fire" : "fire", Task::Fire, "v" + std::to_string(i), false, 0});
    }
    const auto ds = Dataset::from_records(rs);
    auto mc = ModelConfig::tiny(Task::Fire, 1);
    mc.input_size = 8;
    mc.dense_width = 32;
    TrainConfig tc = TrainConfig::for_task(Task::Fire);
    tc.base_lr = 0.05;
    tc.decay = 0.0;
    tc.batch_size = 2;
    tc.max_epochs = 30;
    tc.patience = 30;
    const auto cv = cross_validate(ds, mc, tc, file_image_loader(8), {2, false});
    REQUIRE(cv.folds.size() == 2);
    for (const auto& f : cv.folds) CHECK(f.accuracy == 1.0);
    CHECK(cv.mean_accuracy == 1.0);
    CHECK(cv.std_accuracy == 0.0);
    const auto again = cross_validate(ds, mc, tc, file_image_loader(8), {2, false});
    CHECK(again.to_json() == cv.to_json());
    CHECK_THROWS_AS(cross_validate(ds, mc, tc, file_image_loader(8), {7, false}), StratificationError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit exact") {
    auto m = build_model(ModelConfig::tiny(Task::Poses, 3), 77);
    m.step = 1234;
    const auto dir = testsupport::scratch_dir("ckpt");
    save_checkpoint(m, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back == m);
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(m));
  }

  TEST_CASE("header of the full depth-1 objects network") {
    // zero_model allocates without random init; the header only needs the config
    const auto m = zero_model<float>(ModelConfig::make(Task::Objects, 1));
    const std::string bytes = serialize_checkpoint(m);
    CHECK(checkpoint_header(bytes).find("\"param_count\": 119604039") != std::string::npos);
    CHECK(bytes.size() > 119604039u * 4);
  }

  TEST_CASE("corrupt files are rejected") {
    const auto m = build_model(ModelConfig::tiny(Task::Fire, 1), 1);
    const std::string bytes = serialize_checkpoint(m);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, 10)), CheckpointError);
    std::string wrong_version = bytes;
    wrong_version[8] = 9;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(wrong_version), doctest::Contains("version"), CheckpointError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CheckpointError);
    // header claims depth 2 while the shapes describe depth 1
    std::string header = checkpoint_header(bytes);
    CHECK(header.find("\"depth\": 1") != std::string::npos);
    const auto pos = bytes.find("\"depth\":1");
    REQUIRE(pos != std::string::npos);
    std::string other = bytes;
    other[pos + 8] = '2';
    CHECK_THROWS_AS(deserialize_checkpoint(other), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.ckpt"), CheckpointError);
  }

  TEST_CASE("saving never leaves a partial file behind") {
    const auto dir = testsupport::scratch_dir("ckpt_atomic");
    save_checkpoint(build_model(ModelConfig::tiny(Task::Fire, 1), 1), dir / "m.ckpt");
    CHECK(std::filesystem::exists(dir / "m.ckpt"));
    CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.partial"));
  }
}
