#include "pyroclass/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"

namespace pyroclass {

namespace {

bool inside(std::size_t shape, double dx, double dy, double s) {
  const double r = std::sqrt(dx * dx + dy * dy);
  switch (shape % 5) {
    case 0: return std::abs(dx) < 0.30 * s && std::abs(dy) < 0.08 * s;   // lying
    case 1: return std::abs(dx) < 0.08 * s && std::abs(dy) < 0.30 * s;   // standing
    case 2: return r < 0.20 * s;                                         // compact
    case 3: return r > 0.20 * s && r < 0.30 * s;                         // ring
    default: return std::abs(dx - dy) < 0.10 * s && std::abs(dx + dy) < 0.55 * s;  // diagonal
  }
}

}  // namespace

GrayImage render_synthetic(std::size_t class_index, std::size_t size, Rng& rng) {
  const double s = static_cast<double>(size);
  const double cx = (s - 1.0) / 2.0 + (uniform01(rng) - 0.5) * s / 6.0;
  const double cy = (s - 1.0) / 2.0 + (uniform01(rng) - 0.5) * s / 6.0;
  const double background = 30.0 + 30.0 * uniform01(rng);
  const double warm = 170.0 + 70.0 * uniform01(rng);

  GrayImage img{size, size, std::vector<std::uint8_t>(size * size)};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double v = inside(class_index, dx, dy, s) ? warm : background;
      v += (uniform01(rng) - 0.5) * 24.0;
      img.pixels[y * size + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

Dataset write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticSpec& spec) {
  if (spec.per_class == 0 || spec.image_size < 8 || spec.frames_per_video == 0) {
    throw ConfigError("synthetic corpus needs per_class >= 1, image size >= 8, frames per video >= 1");
  }
  const auto& names = class_names(spec.task);
  std::vector<SampleRecord> records;
  char file[64];
  for (std::size_t c = 0; c < names.size(); ++c) {
    Rng rng(mix_seed(spec.seed, c));
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::snprintf(file, sizeof(file), "c%zu_%05zu.pgm", c, i);
      write_pgm(dir / "images" / file, render_synthetic(c, spec.image_size, rng));
      char video[32];
      std::snprintf(video, sizeof(video), "v%zu_%04zu", c, i / spec.frames_per_video);
      records.push_back({(dir / "images" / file).string(), names[c], spec.task, video, false, 0});
    }
  }
  auto ds = Dataset::from_records(std::move(records));
  write_manifest(dir / "manifest.csv", ds);
  return ds;
}

LabeledImages synthetic_images(std::size_t num_classes, std::size_t per_class, std::size_t size,
                               std::uint64_t seed) {
  const std::size_t n = num_classes * per_class;
  LabeledImages out{Tensor::zeros({n, 1, size, size}), std::vector<int>(n)};
  for (std::size_t c = 0; c < num_classes; ++c) {
    Rng rng(mix_seed(seed, c));
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t idx = c * per_class + i;
      const auto t = to_input_tensor(render_synthetic(c, size, rng), size);
      std::copy(t.data().begin(), t.data().end(), out.images.row0(idx).begin());
      out.labels[idx] = static_cast<int>(c);
    }
  }
  return out;
}

}  // namespace pyroclass
