#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pyroclass/augment.hpp"
#include "pyroclass/model.hpp"
#include "pyroclass/tensor.hpp"

namespace pyroclass {

/// One labeled frame. `synthetic` records are augmented copies added by
/// class balancing; they reference their source image and carry the seed of
/// their augmentation draw.
struct SampleRecord {
  std::string path;
  std::string label;
  Task task_set = Task::Objects;
  std::string video_id;
  bool synthetic = false;
  std::uint64_t augment_seed = 0;

  bool operator==(const SampleRecord&) const = default;
};

/// Label index of `label` within the task's class list; throws LabelError.
int label_index(Task task, const std::string& label);

struct Dataset {
  std::vector<SampleRecord> records;
  std::map<std::string, std::size_t> class_counts;

  static Dataset from_records(std::vector<SampleRecord> records);
  void recount();
  std::size_t size() const { return records.size(); }
  std::size_t count(const std::string& label) const;
  /// Task shared by every record; throws DataError when empty or mixed.
  Task task() const;
};

inline constexpr const char* kManifestHeader = "path,label,task_set,video_id";

struct ManifestOptions {
  /// Fail with a DataError when a referenced image does not exist.
  bool verify_files = true;
};

/// Reads a manifest (CSV, header `path,label,task_set,video_id`). Relative
/// image paths are resolved against `base_dir`. Unknown labels raise a
/// LabelError naming the row; duplicate paths only warn.
Dataset parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                       const ManifestOptions& options = {});
Dataset load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

/// Manifest text for the non-synthetic records, with paths written relative
/// to `relative_to` when given.
std::string format_manifest(const Dataset& dataset, const std::filesystem::path& relative_to = {});
void write_manifest(const std::filesystem::path& path, const Dataset& dataset);

/// Pads every minority class with synthetic copies of its own records (taken
/// in order, cycling) until it matches the largest class. Throws
/// StratificationError when a class of the task has no records.
Dataset balance_classes(const Dataset& dataset, std::uint64_t seed);

struct SplitResult {
  Dataset train_val;
  Dataset test;
  std::map<std::string, std::size_t> quotas;
  bool fallback = false;
  std::uint64_t seed = 0;
  double fraction = 0.1;
};

/// Stratified hold-out split. Each class sends max(1, floor(count*fraction))
/// records to the test side, taking whole videos so no video_id lands on both
/// sides. When whole videos cannot meet every quota within 20%, falls back to
/// record-level stratification and warns. Synthetic records always stay in
/// train_val.
SplitResult split_test(const Dataset& dataset, double fraction, std::uint64_t seed);

/// JSON sidecar describing a split (seed, fraction, per-class counts, fallback).
std::string split_sidecar_json(const SplitResult& split);

struct Fold {
  Dataset train;
  Dataset validation;
};

/// k stratified folds: every original record is validated exactly once and
/// per-class fold sizes differ by at most one. Synthetic records join every
/// training side and never a validation side. Throws StratificationError when
/// a present class has fewer than k original records.
std::vector<Fold> stratified_folds(const Dataset& train_val, int k, std::uint64_t seed);

/// Fold id per entry of `labels`, using the same assignment rule as
/// stratified_folds.
std::vector<int> stratified_fold_ids(const std::vector<int>& labels, int k, std::uint64_t seed);

/// In-memory batch of preprocessed images and their label indices.
struct LabeledImages {
  Tensor images;  // [N,1,S,S]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

using ImageLoader = std::function<Tensor(const SampleRecord&)>;

/// Decodes from disk and resizes to `input_size`; synthetic records are
/// augmented with `spec` using their own seed.
ImageLoader file_image_loader(std::size_t input_size, AugmentSpec spec = {});

/// Loads every record (in parallel) into one batch tensor.
LabeledImages materialize(const Dataset& dataset, const ImageLoader& loader);

/// Deterministic 64-bit mixing used to derive per-record seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Seeded Fisher-Yates shuffle (independent of the standard library's
/// distribution implementations).
void shuffle_indices(std::vector<std::size_t>& v, Rng& rng);

}  // namespace pyroclass
