#include <doctest.h>

#include <png.h>

#include <fstream>
#include <set>
#include <sstream>

#include "pyroclass/augment.hpp"
#include "pyroclass/dataset.hpp"
#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"
#include "pyroclass/image.hpp"
#include "pyroclass/log.hpp"
#include "support.hpp"

using namespace pyroclass;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

// Grayscale PNG written through libpng directly, not through the library.
std::vector<std::uint8_t> gray_png(const GrayImage& img) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  png_image_write_to_memory(&pi, nullptr, &size, 0, img.pixels.data(), 0, nullptr);
  std::vector<std::uint8_t> out(size);
  REQUIRE(png_image_write_to_memory(&pi, out.data(), &size, 0, img.pixels.data(), 0, nullptr));
  out.resize(size);
  return out;
}

SampleRecord rec(const std::string& path, const std::string& label, Task task, const std::string& video) {
  return {path, label, task, video, false, 0};
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("PGM round trip") {
    GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
    CHECK(decode_pgm(bytes_of(encode_pgm(img))) == img);
  }

  TEST_CASE("PGM with comments and a small maxval is rescaled") {
    const std::string text = std::string("P5\n# comment\n2 1\n15\n") + char(15) + char(0);
    auto img = decode_pgm(bytes_of(text));
    CHECK(img.pixels == std::vector<std::uint8_t>{255, 0});
  }

  TEST_CASE("colour and ASCII PNM are rejected") {
    const std::string p6 = std::string("P6\n1 1\n255\n") + "abc";
    CHECK_THROWS_AS(decode_pgm(bytes_of(p6)), DecodeError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P2\n1 1\n255\n7\n")), DecodeError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P5\n4 4\n255\nxx")), DecodeError);
  }

  TEST_CASE("grayscale PNG decodes; RGB PNG is rejected") {
    GrayImage img{2, 2, {1, 2, 3, 250}};
    CHECK(decode_png(gray_png(img)) == img);
    const auto dir = testsupport::scratch_dir("png");
    const std::vector<std::uint8_t> rgb(2 * 2 * 3, 128);
    write_png_rgb(dir / "c.png", 2, 2, rgb);
    CHECK_THROWS_AS(read_gray_image(dir / "c.png"), DecodeError);
    CHECK_THROWS_AS(read_gray_image(dir / "missing.png"), DataError);
  }

  TEST_CASE("bilinear resize keeps constants and interpolates at half-pixel centres") {
    std::vector<float> flat(9, 0.25f);
    for (float v : resize_bilinear(flat, 3, 3, 7, 5)) CHECK(v == 0.25f);
    // 2 -> 4 along x: centres map to -0.25, 0.25, 0.75, 1.25 (clamped)
    auto up = resize_bilinear(std::vector<float>{0.0f, 1.0f}, 2, 1, 4, 1);
    CHECK(up[0] == doctest::Approx(0.0f));
    CHECK(up[1] == doctest::Approx(0.25f));
    CHECK(up[2] == doctest::Approx(0.75f));
    CHECK(up[3] == doctest::Approx(1.0f));
  }

  TEST_CASE("input tensors are scaled to [0,1]") {
    GrayImage img{4, 4, std::vector<std::uint8_t>(16, 255)};
    img.pixels[0] = 0;
    auto t = to_input_tensor(img, 8);
    CHECK(t.shape() == Shape{1, 8, 8});
    for (float v : t.data()) CHECK((v >= 0.0f && v <= 1.0f));
    CHECK(t[0] == 0.0f);
    CHECK(t[63] == 1.0f);
  }
}

TEST_SUITE("augment") {
  TEST_CASE("identity parameters return an exact copy") {
    Rng rng(1);
    auto img = Tensor::zeros({1, 6, 6});
    for (auto& v : img.data()) v = static_cast<float>(uniform01(rng));
    CHECK(apply_affine(img, AffineParams{}) == img);
    Rng r2(3);
    CHECK(augment(img, AugmentSpec::identity(), r2) == img);
  }

  TEST_CASE("a 90 degree rotation permutes pixels") {
    auto img = Tensor::zeros({1, 5, 5});
    for (std::size_t i = 0; i < 25; ++i) img[i] = static_cast<float>(i) / 25.0f;
    AffineParams p;
    p.rotation_deg = 90.0;
    auto out = apply_affine(img, p);
    for (std::size_t y = 0; y < 5; ++y) {
      for (std::size_t x = 0; x < 5; ++x) CHECK(out.at({0, y, x}) == img.at({0, 4 - x, y}));
    }
  }

  TEST_CASE("random draws stay within the configured ranges and are seeded") {
    AugmentSpec spec;
    Rng a(9), b(9);
    for (int i = 0; i < 200; ++i) {
      auto p = sample_affine(spec, a);
      CHECK(std::abs(p.rotation_deg) <= 15.0);
      CHECK(std::abs(p.shear_deg) <= 10.0);
      CHECK(std::abs(p.zoom - 1.0) <= 0.1);
      CHECK(std::abs(p.tx) <= 0.1);
      CHECK(p.crop_fraction == 0.9);
      auto q = sample_affine(spec, b);
      CHECK(p.rotation_deg == q.rotation_deg);
    }
    auto img = Tensor::filled({1, 8, 8}, 0.7f);
    Rng c(2);
    const auto out = augment(img, spec, c);
    for (float v : out.data()) CHECK((v >= 0.0f && v <= 1.0f));
  }

  TEST_CASE("spec validation") {
    AugmentSpec s;
    s.zoom = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = AugmentSpec{};
    s.crop_fraction = 0.4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("manifest parsing resolves paths and names bad rows") {
    std::istringstream ok("path,label,task_set,video_id\na.pgm,sitting,poses,v1\n/abs/b.pgm,standing,poses,v2\n");
    auto ds = parse_manifest(ok, "/data", {false});
    REQUIRE(ds.size() == 2);
    CHECK(ds.records[0].path == "/data/a.pgm");
    CHECK(ds.records[1].path == "/abs/b.pgm");
    CHECK(ds.count("sitting") == 1);
    CHECK(ds.task() == Task::Poses);

    std::istringstream bad("path,label,task_set,video_id\na.pgm,sitting,poses,v1\nb.pgm,dancing,poses,v1\n");
    CHECK_THROWS_WITH_AS(parse_manifest(bad, "", {false}), doctest::Contains("manifest row 2"), LabelError);
    std::istringstream header("file,label\n");
    CHECK_THROWS_AS(parse_manifest(header, "", {false}), DataError);
    std::istringstream missing("path,label,task_set,video_id\nnope.pgm,fire,fire,v\n");
    CHECK_THROWS_AS(parse_manifest(missing, "/nonexistent", {true}), DataError);
  }

  TEST_CASE("duplicate paths only warn") {
    WarningCapture cap;
    std::istringstream dup("path,label,task_set,video_id\na.pgm,fire,fire,v\na.pgm,fire,fire,v\n");
    CHECK(parse_manifest(dup, "", {false}).size() == 2);
    CHECK(cap.contains("duplicate"));
  }

  TEST_CASE("manifest write and reload") {
    const auto dir = testsupport::scratch_dir("manifest");
    write_file_atomic(dir / "img" / "x.pgm", encode_pgm({1, 1, {9}}));
    auto ds = Dataset::from_records({rec((dir / "img" / "x.pgm").string(), "door", Task::Objects, "v0")});
    write_manifest(dir / "m.csv", ds);
    CHECK(read_file_text(dir / "m.csv") == "path,label,task_set,video_id\nimg/x.pgm,door,objects,v0\n");
    CHECK(load_manifest(dir / "m.csv").records == ds.records);
  }

  TEST_CASE("split keeps videos whole and meets quotas") {
    std::vector<SampleRecord> rs;
    for (int v = 0; v < 40; ++v) {
      for (int f = 0; f < 5; ++f) {
        rs.push_back(rec("f" + std::to_string(v * 5 + f), v % 2 ? "fire" : "no-fire", Task::Fire, "v" + std::to_string(v)));
      }
    }
    const auto split = split_test(Dataset::from_records(rs), 0.1, 4);
    CHECK_FALSE(split.fallback);
    CHECK(split.quotas.at("fire") == 10);
    CHECK(split.test.count("fire") == 10);
    CHECK(split.test.count("no-fire") == 10);
    std::set<std::string> test_videos;
    for (const auto& r : split.test.records) test_videos.insert(r.video_id);
    for (const auto& r : split.train_val.records) CHECK(test_videos.count(r.video_id) == 0);
    CHECK(split.test.size() + split.train_val.size() == rs.size());
  }

  TEST_CASE("split falls back to records when videos are too coarse") {
    std::vector<SampleRecord> rs;
    for (int i = 0; i < 30; ++i) rs.push_back(rec("a" + std::to_string(i), "fire", Task::Fire, "big"));
    for (int i = 0; i < 30; ++i) rs.push_back(rec("b" + std::to_string(i), "no-fire", Task::Fire, "v" + std::to_string(i)));
    WarningCapture cap;
    const auto split = split_test(Dataset::from_records(rs), 0.1, 1);
    CHECK(split.fallback);
    CHECK(cap.contains("falling back"));
    CHECK(split.test.count("fire") == 3);
    CHECK(split.test.count("no-fire") == 3);
  }

  TEST_CASE("tiny classes still send one record to test") {
    std::vector<SampleRecord> rs;
    for (int i = 0; i < 5; ++i) rs.push_back(rec("a" + std::to_string(i), "fire", Task::Fire, "a" + std::to_string(i)));
    for (int i = 0; i < 50; ++i) rs.push_back(rec("b" + std::to_string(i), "no-fire", Task::Fire, "b" + std::to_string(i)));
    const auto split = split_test(Dataset::from_records(rs), 0.1, 1);
    CHECK(split.quotas.at("fire") == 1);
    CHECK(split.test.count("fire") == 1);
    CHECK_THROWS_AS(split_test(Dataset::from_records(rs), 1.0, 1), ConfigError);
  }

  TEST_CASE("stratified folds partition each class evenly") {
    std::vector<int> labels;
    for (int i = 0; i < 23; ++i) labels.push_back(0);
    for (int i = 0; i < 11; ++i) labels.push_back(1);
    for (int i = 0; i < 9; ++i) labels.push_back(2);
    const auto ids = stratified_fold_ids(labels, 4, 3);
    for (int c = 0; c < 3; ++c) {
      std::vector<int> per(4, 0);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == c) ++per[static_cast<std::size_t>(ids[i])];
      }
      CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
    }
    CHECK_THROWS_AS(stratified_fold_ids(labels, 10, 3), StratificationError);
  }

  TEST_CASE("synthetic records train in every fold and never validate") {
    std::vector<SampleRecord> rs;
    for (int i = 0; i < 6; ++i) rs.push_back(rec("a" + std::to_string(i), "fire", Task::Fire, "a"));
    for (int i = 0; i < 9; ++i) rs.push_back(rec("b" + std::to_string(i), "no-fire", Task::Fire, "b"));
    const auto balanced = balance_classes(Dataset::from_records(rs), 5);
    CHECK(balanced.count("fire") == 9);
    std::size_t synthetic = 0;
    for (const auto& r : balanced.records) synthetic += r.synthetic;
    CHECK(synthetic == 3);
    const auto folds = stratified_folds(balanced, 3, 1);
    std::size_t validated = 0;
    for (const auto& f : folds) {
      for (const auto& r : f.validation.records) CHECK_FALSE(r.synthetic);
      std::size_t syn = 0;
      for (const auto& r : f.train.records) syn += r.synthetic;
      CHECK(syn == 3);
      validated += f.validation.size();
    }
    CHECK(validated == 15);
    // synthetic copies are not written back to manifests
    CHECK(format_manifest(balanced).find("\n") != std::string::npos);
    std::size_t lines = 0;
    for (char ch : format_manifest(balanced)) lines += ch == '\n';
    CHECK(lines == 16);
  }

  TEST_CASE("balancing needs every class present") {
    auto ds = Dataset::from_records({rec("a", "fire", Task::Fire, "v")});
    CHECK_THROWS_AS(balance_classes(ds, 1), StratificationError);
  }

  TEST_CASE("loader augments only synthetic records") {
    const auto dir = testsupport::scratch_dir("loader");
    GrayImage img{8, 8, std::vector<std::uint8_t>(64)};
    for (std::size_t i = 0; i < 64; ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 4);
    write_pgm(dir / "a.pgm", img);
    auto r = rec((dir / "a.pgm").string(), "fire", Task::Fire, "v");
    auto s = r;
    s.synthetic = true;
    s.augment_seed = 42;
    const auto load = file_image_loader(8);
    CHECK(load(r) == to_input_tensor(img, 8));
    CHECK_FALSE(load(s) == load(r));
    CHECK(load(s) == load(s));
    auto batch = materialize(Dataset::from_records({r, s}), load);
    CHECK(batch.images.shape() == Shape{2, 1, 8, 8});
    CHECK(batch.labels == std::vector<int>{0, 0});
  }
}
