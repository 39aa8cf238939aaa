#include "pyroclass/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"
#include "pyroclass/image.hpp"
#include "pyroclass/log.hpp"

namespace pyroclass {

namespace fs = std::filesystem;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

int label_index(Task task, const std::string& label) {
  const auto& names = class_names(task);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == label) return static_cast<int>(i);
  }
  throw LabelError("unknown label '" + label + "' for task " + std::string(to_string(task)));
}

Dataset Dataset::from_records(std::vector<SampleRecord> records) {
  Dataset d;
  d.records = std::move(records);
  d.recount();
  return d;
}

void Dataset::recount() {
  class_counts.clear();
  for (const auto& r : records) ++class_counts[r.label];
}

std::size_t Dataset::count(const std::string& label) const {
  auto it = class_counts.find(label);
  return it == class_counts.end() ? 0 : it->second;
}

Task Dataset::task() const {
  if (records.empty()) throw DataError("dataset is empty");
  const Task t = records.front().task_set;
  for (const auto& r : records) {
    if (r.task_set != t) throw DataError("dataset mixes task sets");
  }
  return t;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Dataset parse_manifest(std::istream& in, const fs::path& base_dir, const ManifestOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (line != kManifestHeader) {
    throw DataError("manifest header must be exactly '" + std::string(kManifestHeader) + "'");
  }

  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    const std::string where = "manifest row " + std::to_string(row);
    if (fields.size() != 4) {
      throw DataError(where + ": expected 4 fields, found " + std::to_string(fields.size()));
    }
    SampleRecord rec;
    try {
      rec.task_set = parse_task(fields[2]);
    } catch (const ConfigError&) {
      throw LabelError(where + ": unknown task_set '" + fields[2] + "'");
    }
    rec.label = fields[1];
    try {
      label_index(rec.task_set, rec.label);
    } catch (const LabelError& e) {
      throw LabelError(where + ": " + e.what());
    }
    if (fields[0].empty()) throw DataError(where + ": empty path");
    fs::path p(fields[0]);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    rec.path = p.lexically_normal().string();
    rec.video_id = fields[3];
    if (options.verify_files && !fs::exists(rec.path)) {
      throw DataError(where + ": image file not found: " + rec.path);
    }
    if (!seen.insert(rec.path).second) warn(where + ": duplicate path " + rec.path + " (kept)");
    records.push_back(std::move(rec));
  }
  return Dataset::from_records(std::move(records));
}

Dataset load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), options);
}

std::string format_manifest(const Dataset& dataset, const fs::path& relative_to) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : dataset.records) {
    if (r.synthetic) continue;
    std::string path = r.path;
    if (!relative_to.empty()) {
      const auto abs = fs::absolute(r.path).lexically_normal();
      const auto rel = abs.lexically_relative(fs::absolute(relative_to).lexically_normal());
      if (!rel.empty()) path = rel.string();
    }
    out += path + "," + r.label + "," + std::string(to_string(r.task_set)) + "," + r.video_id + "\n";
  }
  return out;
}

void write_manifest(const fs::path& path, const Dataset& dataset) {
  write_file_atomic(path, format_manifest(dataset, path.parent_path().empty() ? fs::path(".")
                                                                              : path.parent_path()));
}

Dataset balance_classes(const Dataset& dataset, std::uint64_t seed) {
  const Task task = dataset.task();
  std::size_t majority = 0;
  for (const auto& name : class_names(task)) {
    const std::size_t n = dataset.count(name);
    if (n == 0) throw StratificationError("cannot balance: class '" + name + "' has no records");
    majority = std::max(majority, n);
  }
  Dataset out = dataset;
  std::uint64_t salt = 0;
  for (const auto& name : class_names(task)) {
    std::vector<const SampleRecord*> sources;
    for (const auto& r : dataset.records) {
      if (r.label == name) sources.push_back(&r);
    }
    for (std::size_t i = dataset.count(name); i < majority; ++i) {
      SampleRecord copy = *sources[(i - dataset.count(name)) % sources.size()];
      copy.synthetic = true;
      copy.augment_seed = mix_seed(seed, salt++);
      out.records.push_back(std::move(copy));
    }
  }
  out.recount();
  return out;
}

SplitResult split_test(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("test fraction must be in (0,1), got " + std::to_string(fraction));
  }
  SplitResult result;
  result.seed = seed;
  result.fraction = fraction;

  std::map<std::string, std::size_t> originals;
  for (const auto& r : dataset.records) {
    if (!r.synthetic) ++originals[r.label];
  }
  for (const auto& [label, n] : originals) {
    const auto q = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
    result.quotas[label] = std::max<std::size_t>(1, q);
  }

  // Whole-video assignment: first without exceeding any quota, then allowing
  // up to 20% overshoot.
  std::map<std::string, std::vector<std::size_t>> videos;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (!dataset.records[i].synthetic) videos[dataset.records[i].video_id].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [id, members] : videos) order.push_back(&members);
  Rng rng(seed);
  {
    std::vector<std::size_t> perm(order.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    shuffle_indices(perm, rng);
    std::vector<const std::vector<std::size_t>*> shuffled;
    for (auto i : perm) shuffled.push_back(order[i]);
    order = std::move(shuffled);
  }

  std::map<std::string, std::size_t> taken;
  std::vector<bool> in_test(dataset.records.size(), false);
  std::vector<bool> used(order.size(), false);
  auto try_take = [&](std::size_t v, double slack) {
    std::map<std::string, std::size_t> add;
    for (auto i : *order[v]) ++add[dataset.records[i].label];
    bool needed = false;
    for (const auto& [label, n] : add) {
      const std::size_t q = result.quotas[label];
      const auto cap = q + static_cast<std::size_t>(std::floor(static_cast<double>(q) * slack));
      if (taken[label] + n > cap) return;
      if (taken[label] < q) needed = true;
    }
    if (!needed) return;
    for (const auto& [label, n] : add) taken[label] += n;
    for (auto i : *order[v]) in_test[i] = true;
    used[v] = true;
  };
  for (std::size_t v = 0; v < order.size(); ++v) try_take(v, 0.0);
  for (std::size_t v = 0; v < order.size(); ++v) {
    if (!used[v]) try_take(v, 0.2);
  }

  bool ok = true;
  for (const auto& [label, q] : result.quotas) {
    const double diff = std::abs(static_cast<double>(taken[label]) - static_cast<double>(q));
    if (diff > 0.2 * static_cast<double>(q)) ok = false;
  }

  if (!ok) {
    result.fallback = true;
    warn("split: whole-video assignment cannot meet per-class test quotas within 20%; "
         "falling back to record-level stratification (videos may appear on both sides)");
    std::fill(in_test.begin(), in_test.end(), false);
    for (const auto& [label, q] : result.quotas) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (!dataset.records[i].synthetic && dataset.records[i].label == label) idx.push_back(i);
      }
      shuffle_indices(idx, rng);
      for (std::size_t j = 0; j < std::min(q, idx.size()); ++j) in_test[idx[j]] = true;
    }
  }

  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    (in_test[i] ? result.test : result.train_val).records.push_back(dataset.records[i]);
  }
  result.test.recount();
  result.train_val.recount();
  return result;
}

std::string split_sidecar_json(const SplitResult& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["fraction"] = split.fraction;
  j["fallback"] = split.fallback;
  j["quotas"] = split.quotas;
  j["test_counts"] = split.test.class_counts;
  j["train_val_counts"] = split.train_val.class_counts;
  j["test_size"] = split.test.size();
  j["train_val_size"] = split.train_val.size();
  return j.dump(2) + "\n";
}

std::vector<int> stratified_fold_ids(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < static_cast<std::size_t>(k)) {
      throw StratificationError("class " + std::to_string(label) + " has " +
                                std::to_string(idx.size()) + " records, fewer than " +
                                std::to_string(k) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<int> fold(labels.size(), -1);
  std::size_t offset = 0;
  for (auto& [label, idx] : by_class) {
    shuffle_indices(idx, rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      fold[idx[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(k));
    }
    offset += idx.size();
  }
  return fold;
}

std::vector<Fold> stratified_folds(const Dataset& train_val, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be >= 2");
  const Task task = train_val.task();
  std::vector<std::size_t> original;
  std::vector<int> labels;
  for (std::size_t i = 0; i < train_val.records.size(); ++i) {
    if (train_val.records[i].synthetic) continue;
    original.push_back(i);
    labels.push_back(label_index(task, train_val.records[i].label));
  }
  std::vector<int> ids;
  try {
    ids = stratified_fold_ids(labels, k, seed);
  } catch (const StratificationError&) {
    for (const auto& name : class_names(task)) {
      std::size_t n = 0;
      for (const auto& r : train_val.records) n += (!r.synthetic && r.label == name);
      if (n > 0 && n < static_cast<std::size_t>(k)) {
        throw StratificationError("class '" + name + "' has " + std::to_string(n) +
                                  " records, fewer than " + std::to_string(k) + " folds");
      }
    }
    throw;
  }

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::size_t next = 0;
    for (std::size_t i = 0; i < train_val.records.size(); ++i) {
      const auto& rec = train_val.records[i];
      if (rec.synthetic) {
        folds[f].train.records.push_back(rec);
        continue;
      }
      const bool val = ids[next++] == static_cast<int>(f);
      (val ? folds[f].validation : folds[f].train).records.push_back(rec);
    }
    folds[f].train.recount();
    folds[f].validation.recount();
  }
  return folds;
}

ImageLoader file_image_loader(std::size_t input_size, AugmentSpec spec) {
  spec.validate();
  return [input_size, spec](const SampleRecord& rec) {
    Tensor img = decode_and_resize(rec.path, input_size);
    if (!rec.synthetic) return img;
    Rng rng(rec.augment_seed);
    return augment(img, spec, rng);
  };
}

LabeledImages materialize(const Dataset& dataset, const ImageLoader& loader) {
  if (dataset.records.empty()) throw DataError("cannot load an empty dataset");
  const Task task = dataset.task();
  const std::size_t n = dataset.records.size();
  std::vector<Tensor> images(n);
  LabeledImages out;
  out.labels.resize(n);

  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      images[i] = loader(dataset.records[i]);
      out.labels[i] = label_index(task, dataset.records[i].label);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  const Shape& s = images.front().shape();
  if (s.size() != 3 || s[0] != 1) throw ShapeError("loader must produce [1,S,S] images");
  out.images = Tensor::zeros({n, s[0], s[1], s[2]});
  for (std::size_t i = 0; i < n; ++i) {
    if (images[i].shape() != s) throw ShapeError("loader produced images of differing shapes");
    std::copy(images[i].data().begin(), images[i].data().end(), out.images.row0(i).begin());
  }
  return out;
}

}  // namespace pyroclass
