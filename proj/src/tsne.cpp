#include "pyroclass/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"
#include "pyroclass/log.hpp"
#include "pyroclass/metrics.hpp"

namespace pyroclass {

namespace {

constexpr double kEntropyTol = 1e-5;
constexpr int kSearchSteps = 50;

std::vector<double> squared_distances(const PointSet& pts) {
  const std::size_t n = pts.n;
  std::vector<double> d2(n * n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto a = pts.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = pts.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < pts.d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      d2[i * n + j] = s;
    }
  }
  return d2;
}

// Row i of the conditional distribution at precision beta; returns entropy in bits.
double fill_row(const std::vector<double>& d2, std::size_t n, std::size_t i, double beta, double* row) {
  // Shift by the nearest distance so the largest weight is exp(0).
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, d2[i * n + j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - dmin));
    sum += row[j];
  }
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] /= sum;
    if (row[j] > 0.0) h -= row[j] * std::log2(row[j]);
  }
  return h;
}

}  // namespace

void EmbedConfig::validate() const {
  if (!(perplexity >= 2.0)) throw ConfigError("perplexity must be >= 2");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("t-SNE learning rate must be > 0");
  if (exaggeration < 1.0) throw ConfigError("exaggeration must be >= 1");
}

double effective_perplexity(double perplexity, std::size_t n) {
  const double cap = static_cast<double>(n) / 3.0;
  return perplexity < cap ? perplexity : std::nextafter(cap, 0.0);
}

PointSet collect_outputs(const Model& model, const LabeledImages& data, std::size_t batch_size) {
  const std::size_t n = data.size(), k = model.config.num_classes;
  if (n == 0) throw DataError("no samples to embed");
  PointSet out{n, k, std::vector<double>(n * k)};
  const auto& s = data.images.shape();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    auto batch = Tensor::zeros({len, s[1], s[2], s[3]});
    for (std::size_t b = 0; b < len; ++b) {
      auto src = data.images.row0(start + b);
      std::copy(src.begin(), src.end(), batch.row0(b).begin());
    }
    const auto scores = predict(model, std::move(batch));
    for (std::size_t i = 0; i < len * k; ++i) out.values[start * k + i] = scores[i];
  }
  return out;
}

double entropy_bits(std::span<const double> row) {
  double h = 0.0;
  for (double p : row) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

Affinities joint_affinities(const PointSet& input, double perplexity) {
  if (input.n < 2) throw ConfigError("t-SNE needs at least two points");
  if (!(perplexity > 0.0)) throw ConfigError("perplexity must be positive");
  const std::size_t n = input.n;

  PointSet pts = input;
  auto d2 = squared_distances(pts);
  bool duplicate = false;
  for (std::size_t i = 0; i < n && !duplicate; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d2[i * n + j] == 0.0) {
        duplicate = true;
        break;
      }
    }
  }
  if (duplicate) {
    warn("t-SNE input has duplicate points; adding 1e-12 jitter");
    Rng rng(0x7453);
    for (auto& v : pts.values) v += 1e-12 * (2.0 * uniform01(rng) - 1.0);
    d2 = squared_distances(pts);
  }

  Affinities a;
  a.n = n;
  a.conditional.assign(n * n, 0.0);
  a.beta.assign(n, 1.0);
  const double target = std::log2(perplexity);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* row = a.conditional.data() + i * n;
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = fill_row(d2, n, i, beta, row);
    for (int step = 0; step < kSearchSteps && std::abs(h - target) > kEntropyTol; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
      h = fill_row(d2, n, i, beta, row);
    }
    a.beta[i] = beta;
  }

  a.joint.assign(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a.joint[i * n + j] = (a.conditional[i * n + j] + a.conditional[j * n + i]) / denom;
    }
  }
  return a;
}

namespace {

// Student-t kernel 1/(1+|yi-yj|^2) and its sum over i != j.
double student_kernel(std::span<const double> y, std::size_t n, std::vector<double>& num) {
  num.assign(n * n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  double sum = 0.0;
  for (double v : num) sum += v;
  return sum;
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> y, std::size_t n) {
  std::vector<double> num;
  const double sum = student_kernel(y, n, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(num[i] / sum, 1e-300));
  }
  return kl;
}

std::vector<double> kl_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                                double exaggeration) {
  std::vector<double> num;
  const double sum = student_kernel(y, n, num);
  std::vector<double> grad(2 * n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double m = (exaggeration * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
      gx += m * (y[2 * i] - y[2 * j]);
      gy += m * (y[2 * i + 1] - y[2 * j + 1]);
    }
    grad[2 * i] = 4.0 * gx;
    grad[2 * i + 1] = 4.0 * gy;
  }
  return grad;
}

Embedding tsne(const PointSet& points, const EmbedConfig& config) {
  config.validate();
  const std::size_t n = points.n;
  Embedding e;
  e.n = n;
  e.config = config;
  e.perplexity = effective_perplexity(config.perplexity, n);
  const auto aff = joint_affinities(points, e.perplexity);
  const auto& p = aff.joint;

  Rng rng(config.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  e.points.resize(2 * n);
  for (auto& v : e.points) v = init(rng);
  e.initial_kl = kl_divergence(p, e.points, n);

  std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0);
  for (int it = 0; it < config.iterations; ++it) {
    const double ex = it < config.exaggeration_iterations ? config.exaggeration : 1.0;
    const double mom = it < config.momentum_switch ? config.momentum : config.final_momentum;
    const auto grad = kl_gradient(p, e.points, n, ex);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericError("t-SNE diverged: non-finite gradient at iteration " + std::to_string(it));
      }
      gains[i] = (grad[i] > 0.0) != (update[i] > 0.0) ? gains[i] + 0.2 : gains[i] * 0.8;
      gains[i] = std::max(gains[i], 0.01);
      update[i] = mom * update[i] - config.learning_rate * gains[i] * grad[i];
      e.points[i] += update[i];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += e.points[2 * i];
      my += e.points[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      e.points[2 * i] -= mx;
      e.points[2 * i + 1] -= my;
    }
  }
  e.kl = kl_divergence(p, e.points, n);
  return e;
}

void export_embedding(const Embedding& embedding, std::span<const int> labels,
                      const std::vector<std::string>& names, const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path) {
  if (labels.size() != embedding.n) throw ShapeError("export_embedding: label count differs from point count");
  std::string csv = "x,y,label\n";
  for (std::size_t i = 0; i < embedding.n; ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    csv += format_double(embedding.points[2 * i]) + ',' + format_double(embedding.points[2 * i + 1]) + ',' +
           (l < names.size() ? names[l] : std::to_string(labels[i])) + '\n';
  }
  const auto& c = embedding.config;
  nlohmann::ordered_json j;
  j["n"] = embedding.n;
  j["seed"] = c.seed;
  j["perplexity_requested"] = c.perplexity;
  j["perplexity"] = embedding.perplexity;
  j["iterations"] = c.iterations;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["final_momentum"] = c.final_momentum;
  j["momentum_switch"] = c.momentum_switch;
  j["exaggeration"] = c.exaggeration;
  j["exaggeration_iterations"] = c.exaggeration_iterations;
  j["initial_kl"] = embedding.initial_kl;
  j["kl"] = embedding.kl;
  j["inputs"] = "softmax scores";
  write_file_atomic(csv_path, csv);
  write_file_atomic(json_path, j.dump(2) + "\n");
}

}  // namespace pyroclass
