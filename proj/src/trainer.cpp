#include "pyroclass/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "pyroclass/error.hpp"
#include "pyroclass/metrics.hpp"

namespace pyroclass {

std::string_view to_string(DecayMode mode) {
  return mode == DecayMode::PerUpdate ? "per-update" : "per-epoch";
}

DecayMode parse_decay_mode(std::string_view name) {
  if (name == "per-update") return DecayMode::PerUpdate;
  if (name == "per-epoch") return DecayMode::PerEpoch;
  throw ConfigError("unknown decay mode '" + std::string(name) + "' (expected per-update|per-epoch)");
}

TrainConfig TrainConfig::for_task(Task task) {
  TrainConfig c;
  c.loss = class_count(task) == 2 ? LossKind::Binary : LossKind::Categorical;
  return c;
}

void TrainConfig::validate(std::size_t num_classes) const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("learning rate must be > 0");
  if (!(decay >= 0.0) || !std::isfinite(decay)) throw ConfigError("decay must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if ((loss == LossKind::Binary) != (num_classes == 2)) {
    throw ConfigError("binary loss is used exactly when the task has two classes");
  }
}

double learning_rate(const TrainConfig& config, std::uint64_t step, int epoch) {
  const double t = config.decay_mode == DecayMode::PerUpdate ? static_cast<double>(step)
                                                             : static_cast<double>(epoch);
  return config.base_lr / (1.0 + config.decay * t);
}

template <typename T>
void sgd_step(BasicTensor<T>& param, const BasicTensor<T>& grad, double lr) {
  if (param.shape() != grad.shape()) {
    throw ShapeError("sgd_step: gradient shape " + shape_string(grad.shape()) +
                     " differs from parameter shape " + shape_string(param.shape()));
  }
  const T step = static_cast<T>(lr);
  auto p = param.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * g[i];
}

template <typename T>
void sgd_step(BasicModel<T>& model, const Gradients<T>& grads, double lr) {
  if (grads.layers.size() != model.layers.size()) throw ShapeError("sgd_step: gradient layout mismatch");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (auto* c = std::get_if<ConvLayer<T>>(&model.layers[i])) {
      sgd_step(c->params.kernels, grads.layers[i].weights, lr);
      sgd_step(c->params.bias, grads.layers[i].bias, lr);
    } else if (auto* d = std::get_if<DenseLayer<T>>(&model.layers[i])) {
      sgd_step(d->params.weights, grads.layers[i].weights, lr);
      sgd_step(d->params.bias, grads.layers[i].bias, lr);
    }
  }
}

template <typename T>
LossResult<T> task_loss(LossKind kind, const BasicTensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.extent(0) != labels.size()) {
    throw ShapeError("task_loss: scores and labels disagree in length");
  }
  const std::size_t n = probs.extent(0), k = probs.extent(1);
  if (kind == LossKind::Categorical) return categorical_cross_entropy(probs, one_hot<T>(labels, k));

  if (k != 2) throw ConfigError("binary loss needs a two-class head");
  auto p = BasicTensor<T>::zeros({n});
  auto y = BasicTensor<T>::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] > 1) throw LabelError("binary label out of range");
    p[i] = probs[i * 2];
    y[i] = labels[i] == 0 ? T(1) : T(0);
  }
  auto bce = binary_cross_entropy(p, y);
  LossResult<T> out{bce.loss, BasicTensor<T>::zeros(probs.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    // dp0/dz0 = p0 (1 - p0) = -dp0/dz1 for a two-way softmax.
    const double p0 = static_cast<double>(probs[i * 2]);
    const double g = static_cast<double>(bce.grad[i]) * p0 * (1.0 - p0);
    out.grad[i * 2] = static_cast<T>(g);
    out.grad[i * 2 + 1] = static_cast<T>(-g);
  }
  return out;
}

EarlyStopping::EarlyStopping(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_loss_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (best_epoch_ == 0 || val_loss < best_loss_ - min_delta_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["train_loss"] = train_loss;
  j["val_loss"] = val_loss;
  j["val_acc"] = val_acc;
  j["best_epoch"] = best_epoch;
  j["stopped_epoch"] = stopped_epoch;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

namespace {

Tensor gather_batch(const LabeledImages& data, std::span<const std::size_t> idx,
                    std::vector<int>& labels) {
  const auto& s = data.images.shape();
  auto batch = Tensor::zeros({idx.size(), s[1], s[2], s[3]});
  labels.resize(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    auto src = data.images.row0(idx[b]);
    std::copy(src.begin(), src.end(), batch.row0(b).begin());
    labels[b] = data.labels[idx[b]];
  }
  return batch;
}

}  // namespace

Evaluation evaluate(const Model& model, const LabeledImages& data, LossKind loss,
                    std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate an empty set");
  const std::size_t n = data.size();
  const std::size_t k = model.config.num_classes;
  Evaluation ev;
  ev.scores = Tensor::zeros({n, k});
  ev.predictions.resize(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;

  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<int> labels;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    auto batch = gather_batch(data, std::span(idx).subspan(start, len), labels);
    auto scores = predict(model, std::move(batch));
    loss_sum += task_loss(loss, scores, labels).loss * static_cast<double>(len);
    for (std::size_t b = 0; b < len; ++b) {
      auto row = scores.row0(b);
      std::copy(row.begin(), row.end(), ev.scores.row0(start + b).begin());
      const auto pred = static_cast<int>(argmax_first(std::span<const float>(row)));
      ev.predictions[start + b] = pred;
      correct += pred == labels[b];
    }
  }
  ev.loss = loss_sum / static_cast<double>(n);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return ev;
}

TrainResult train(Model model, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config) {
  config.validate(model.config.num_classes);
  if (train_set.size() == 0 || val_set.size() == 0) throw DataError("training and validation sets must be non-empty");

  Rng rng(config.seed);
  EarlyStopping stopper(config.patience, config.min_delta);
  TrainResult result{model, {}};
  result.report.seed = config.seed;

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<int> labels;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_indices(order, rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      auto batch = gather_batch(train_set, std::span(order).subspan(start, len), labels);
      ForwardOptions opts;
      opts.training = true;
      auto fwd = forward(model, std::move(batch), opts, &rng);
      auto loss = task_loss(config.loss, fwd.scores, labels);
      if (!std::isfinite(loss.loss)) {
        throw TrainingDivergedError(epoch, "training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      auto grads = backward(model, fwd.trace, loss.grad);
      sgd_step(model, grads, learning_rate(config, model.step, epoch - 1));
      ++model.step;
      loss_sum += loss.loss * static_cast<double>(len);
    }

    Evaluation val;
    try {
      val = evaluate(model, val_set, config.loss, config.batch_size);
    } catch (const NumericError&) {
      throw TrainingDivergedError(epoch, "training diverged: non-finite validation scores in epoch " +
                                             std::to_string(epoch));
    }
    if (!std::isfinite(val.loss)) {
      throw TrainingDivergedError(epoch, "training diverged: non-finite validation loss in epoch " +
                                             std::to_string(epoch));
    }
    result.report.train_loss.push_back(loss_sum / static_cast<double>(n));
    result.report.val_loss.push_back(val.loss);
    result.report.val_acc.push_back(val.accuracy);
    result.report.stopped_epoch = epoch;
    if (stopper.update(epoch, val.loss)) result.model = model;
    if (stopper.should_stop()) break;
  }
  result.report.best_epoch = stopper.best_epoch();
  return result;
}

std::string CrossValResult::to_json() const {
  nlohmann::ordered_json j;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json fj;
    fj["accuracy"] = f.accuracy;
    fj["macro_f1"] = f.macro_f1;
    fj["best_epoch"] = f.report.best_epoch;
    fj["stopped_epoch"] = f.report.stopped_epoch;
    fj["train_loss"] = f.report.train_loss;
    fj["val_loss"] = f.report.val_loss;
    fj["val_acc"] = f.report.val_acc;
    j["folds"].push_back(fj);
  }
  j["mean_accuracy"] = mean_accuracy;
  j["std_accuracy"] = std_accuracy;
  j["mean_f1"] = mean_f1;
  j["std_f1"] = std_f1;
  return j.dump(2) + "\n";
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

CrossValResult cross_validate(const Dataset& train_val, const ModelConfig& model_config,
                              const TrainConfig& config, const ImageLoader& loader,
                              const CrossValOptions& options) {
  model_config.validate();
  config.validate(model_config.num_classes);
  const auto folds = stratified_folds(train_val, options.k, config.seed);

  CrossValResult out;
  std::vector<double> accs, f1s;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Dataset train_side =
        options.balance ? balance_classes(folds[f].train, mix_seed(config.seed, 1000 + f)) : folds[f].train;
    const auto train_data = materialize(train_side, loader);
    const auto val_data = materialize(folds[f].validation, loader);

    TrainConfig fold_config = config;
    fold_config.seed = mix_seed(config.seed, f);
    auto trained = train(build_model(model_config, fold_config.seed), train_data, val_data, fold_config);
    const auto ev = evaluate(trained.model, val_data, config.loss, config.batch_size);
    const auto cm = confusion_matrix(ev.predictions, val_data.labels, model_config.num_classes);
    const auto prf = precision_recall_f1(cm);

    FoldResult fr{std::move(trained.report), ev.accuracy, prf.macro_f1};
    accs.push_back(fr.accuracy);
    f1s.push_back(fr.macro_f1);
    out.folds.push_back(std::move(fr));
  }
  std::tie(out.mean_accuracy, out.std_accuracy) = mean_std(accs);
  std::tie(out.mean_f1, out.std_f1) = mean_std(f1s);
  return out;
}

template void sgd_step(BasicTensor<float>&, const BasicTensor<float>&, double);
template void sgd_step(BasicTensor<double>&, const BasicTensor<double>&, double);
template void sgd_step(BasicModel<float>&, const Gradients<float>&, double);
template void sgd_step(BasicModel<double>&, const Gradients<double>&, double);
template LossResult<float> task_loss(LossKind, const BasicTensor<float>&, std::span<const int>);
template LossResult<double> task_loss(LossKind, const BasicTensor<double>&, std::span<const int>);

}  // namespace pyroclass
