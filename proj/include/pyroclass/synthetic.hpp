#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pyroclass/dataset.hpp"
#include "pyroclass/image.hpp"

namespace pyroclass {

/// Thermal-looking toy frames: a dim noisy background with a warm blob whose
/// shape depends on the class (bar, column, disc, ring, cross, ...). Classes
/// are separable by construction.
GrayImage render_synthetic(std::size_t class_index, std::size_t size, Rng& rng);

struct SyntheticSpec {
  Task task = Task::Poses;
  std::size_t per_class = 100;
  std::size_t image_size = 32;
  /// Consecutive frames of one class share a video id.
  std::size_t frames_per_video = 5;
  std::uint64_t seed = 0;
};

/// Renders the corpus into `dir` as PGM files and writes `dir/manifest.csv`.
Dataset write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticSpec& spec);

/// In-memory equivalent: per_class frames of each class at `size`, already
/// converted to a [N,1,size,size] batch.
LabeledImages synthetic_images(std::size_t num_classes, std::size_t per_class, std::size_t size,
                               std::uint64_t seed);

}  // namespace pyroclass
