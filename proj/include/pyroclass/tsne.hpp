#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pyroclass/dataset.hpp"
#include "pyroclass/model.hpp"

namespace pyroclass {

/// N points of dimension d, row-major.
struct PointSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

struct EmbedConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double exaggeration = 4.0;
  int exaggeration_iterations = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Perplexity actually used for n points: capped just below n/3.
double effective_perplexity(double perplexity, std::size_t n);

struct Embedding {
  std::size_t n = 0;
  std::vector<double> points;  // n x 2
  double initial_kl = 0.0;
  double kl = 0.0;
  double perplexity = 0.0;  // after capping
  EmbedConfig config;
};

/// Softmax score vector per sample, in dataset order.
PointSet collect_outputs(const Model& model, const LabeledImages& data, std::size_t batch_size = 32);

struct Affinities {
  std::size_t n = 0;
  std::vector<double> joint;        // symmetric, sums to 1, zero diagonal
  std::vector<double> conditional;  // row i holds p_{j|i}
  std::vector<double> beta;         // 1 / (2 sigma_i^2)
};

/// Per-point bandwidths by binary search on the row entropy (log2 of the
/// perplexity, tolerance 1e-5 bits, at most 50 steps), then
/// p_ij = (p_{j|i} + p_{i|j}) / 2N.
Affinities joint_affinities(const PointSet& points, double perplexity);

/// Shannon entropy in bits of a distribution (zero entries ignored).
double entropy_bits(std::span<const double> row);

/// KL(P || Q) for a 2-D layout `y` (n x 2).
double kl_divergence(std::span<const double> p, std::span<const double> y, std::size_t n);
/// Gradient of KL(exaggeration * P || Q) with respect to `y`.
std::vector<double> kl_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                                double exaggeration = 1.0);

/// Exact t-SNE with momentum, per-coordinate gains and early exaggeration.
/// Throws NumericError if the gradient stops being finite.
Embedding tsne(const PointSet& points, const EmbedConfig& config);

/// CSV `x,y,label` at full precision plus a JSON sidecar (config, seed, KL).
void export_embedding(const Embedding& embedding, std::span<const int> labels,
                      const std::vector<std::string>& names, const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path);

}  // namespace pyroclass
