#pragma once

// 64-bit central finite-difference checks for every layer and for a whole
// model. Each returns the worst relative error found.

#include <algorithm>
#include <numeric>
#include <random>

#include "pyroclass/layers.hpp"
#include "pyroclass/loss.hpp"
#include "pyroclass/model.hpp"
#include "pyroclass/trainer.hpp"
#include "support.hpp"

namespace gradcheck {

using namespace pyroclass;
using testsupport::max_rel_err;
using testsupport::numeric_grad;
using testsupport::random_tensor;
using testsupport::rel_err;

inline double conv(std::size_t ksize, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = random_tensor({2, 3, 5, 4}, rng);
  ConvParams<double> p{random_tensor({4, 3, ksize, ksize}, rng), random_tensor({4}, rng)};
  auto r = random_tensor({2, 4, 5, 4}, rng);
  auto loss = [&] { return testsupport::dot(conv2d_forward(x, p).output, r); };
  auto fwd = conv2d_forward(x, p);
  auto g = conv2d_backward(fwd.cache, p, r);
  double worst = max_rel_err(g.input, numeric_grad(loss, x));
  worst = std::max(worst, max_rel_err(g.kernels, numeric_grad(loss, p.kernels)));
  worst = std::max(worst, max_rel_err(g.bias, numeric_grad(loss, p.bias)));
  return worst;
}

inline double relu(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = random_tensor({2, 3, 4, 4}, rng);
  for (auto& v : x.data()) v = v < 0 ? v - 0.2 : v + 0.2;  // keep clear of the kink
  auto r = random_tensor(x.shape(), rng);
  auto loss = [&] { return testsupport::dot(relu_forward(x).output, r); };
  auto fwd = relu_forward(x);
  return max_rel_err(relu_backward<double>(fwd.cache, r), numeric_grad(loss, x));
}

inline double maxpool(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = TensorD::zeros({2, 2, 4, 6});
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(order[i]);  // tie-free
  auto r = random_tensor({2, 2, 2, 3}, rng);
  auto loss = [&] { return testsupport::dot(maxpool2x2_forward(x).output, r); };
  auto fwd = maxpool2x2_forward(x);
  return max_rel_err(maxpool2x2_backward<double>(fwd.cache, r), numeric_grad(loss, x));
}

inline double dense(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = random_tensor({3, 7}, rng);
  DenseParams<double> p{random_tensor({5, 7}, rng), random_tensor({5}, rng)};
  auto r = random_tensor({3, 5}, rng);
  auto loss = [&] { return testsupport::dot(dense_forward(x, p).output, r); };
  auto fwd = dense_forward(x, p);
  auto g = dense_backward(fwd.cache, p, r);
  double worst = max_rel_err(g.input, numeric_grad(loss, x));
  worst = std::max(worst, max_rel_err(g.weights, numeric_grad(loss, p.weights)));
  worst = std::max(worst, max_rel_err(g.bias, numeric_grad(loss, p.bias)));
  return worst;
}

inline double dropout(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = random_tensor({4, 9}, rng);
  auto r = random_tensor({4, 9}, rng);
  auto run = [&] {
    Rng mask_rng(seed);  // same mask on every evaluation
    return dropout_forward(x, 0.5, mask_rng, true);
  };
  auto loss = [&] { return testsupport::dot(run().output, r); };
  auto fwd = run();
  return max_rel_err(dropout_backward<double>(fwd.cache, r), numeric_grad(loss, x));
}

inline double softmax_ce(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto z = random_tensor({4, 5}, rng, -3.0, 3.0);
  std::vector<int> labels{0, 3, 4, 1};
  auto y = one_hot<double>(labels, 5);
  auto loss = [&] { return categorical_cross_entropy(softmax(z), y).loss; };
  auto analytic = categorical_cross_entropy(softmax(z), y).grad;
  return max_rel_err(analytic, numeric_grad(loss, z));
}

inline double bce(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto p = random_tensor({6}, rng, 0.05, 0.95);
  auto y = TensorD::from({6}, {0, 1, 1, 0, 1, 0});
  auto loss = [&] { return binary_cross_entropy(p, y).loss; };
  return max_rel_err(binary_cross_entropy(p, y).grad, numeric_grad(loss, p));
}

inline double binary_head(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto z = random_tensor({5, 2}, rng, -2.0, 2.0);
  std::vector<int> labels{0, 1, 1, 0, 0};
  auto loss = [&] { return task_loss(LossKind::Binary, softmax(z), labels).loss; };
  auto analytic = task_loss(LossKind::Binary, softmax(z), labels).grad;
  return max_rel_err(analytic, numeric_grad(loss, z));
}

/// ReLU signs and pool winners of a forward pass; a probe whose +eps and -eps
/// passes disagree on these straddles a kink and is skipped.
inline std::vector<std::size_t> activation_pattern(const BasicModel<double>& m, const TensorD& x) {
  ForwardOptions opts;
  opts.retain = true;
  const auto fwd = forward(m, x, opts);
  std::vector<std::size_t> out;
  for (const auto& c : fwd.trace.caches) {
    if (const auto* r = std::get_if<ReluCache>(&c)) out.insert(out.end(), r->positive.begin(), r->positive.end());
    if (const auto* p = std::get_if<PoolCache>(&c)) out.insert(out.end(), p->argmax.begin(), p->argmax.end());
  }
  return out;
}

/// Whole-model check: loss = CE(softmax(model(x))) in inference mode, probed
/// at `per_tensor` random entries of every parameter tensor and of the input.
inline double model(const ModelConfig& config, std::uint64_t seed, std::size_t per_tensor = 12) {
  std::mt19937_64 rng(seed);
  auto m = build_model<double>(config, seed);
  // random biases so no unit starts exactly at a ReLU kink
  for_each_param(m, std::function<void(TensorD&)>([&](TensorD& t) {
                   if (t.rank() == 1) t = random_tensor(t.shape(), rng, -0.1, 0.1);
                 }));
  const std::size_t s = config.input_size;
  auto x = random_tensor({2, 1, s, s}, rng, 0.0, 1.0);
  std::vector<int> labels{0, static_cast<int>(config.num_classes - 1)};
  const auto y = one_hot<double>(labels, config.num_classes);
  auto loss = [&] { return categorical_cross_entropy(predict(m, x), y).loss; };

  ForwardOptions opts;
  opts.retain = true;
  auto fwd = forward(m, x, opts);
  const auto grads = backward(m, fwd.trace, categorical_cross_entropy(fwd.scores, y).grad);

  auto probe = [&](TensorD& t, const TensorD& g) {
    double worst = 0.0;
    std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
    for (std::size_t n = 0; n < std::min(per_tensor, t.size()); ++n) {
      const std::size_t i = pick(rng);
      const double keep = t[i], eps = 1e-6;
      t[i] = keep + eps;
      const double up = loss();
      const auto pattern_up = activation_pattern(m, x);
      t[i] = keep - eps;
      const double down = loss();
      const auto pattern_down = activation_pattern(m, x);
      t[i] = keep;
      if (pattern_up != pattern_down) continue;
      worst = std::max(worst, rel_err(g[i], (up - down) / (2.0 * eps)));
    }
    return worst;
  };

  double worst = probe(x, grads.input);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (auto* c = std::get_if<ConvLayer<double>>(&m.layers[l])) {
      worst = std::max(worst, probe(c->params.kernels, grads.layers[l].weights));
      worst = std::max(worst, probe(c->params.bias, grads.layers[l].bias));
    } else if (auto* d = std::get_if<DenseLayer<double>>(&m.layers[l])) {
      worst = std::max(worst, probe(d->params.weights, grads.layers[l].weights));
      worst = std::max(worst, probe(d->params.bias, grads.layers[l].bias));
    }
  }
  return worst;
}

}  // namespace gradcheck
