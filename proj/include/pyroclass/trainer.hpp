#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pyroclass/dataset.hpp"
#include "pyroclass/loss.hpp"
#include "pyroclass/model.hpp"

namespace pyroclass {

enum class LossKind { Categorical, Binary };
enum class DecayMode { PerUpdate, PerEpoch };

std::string_view to_string(DecayMode mode);
DecayMode parse_decay_mode(std::string_view name);

struct TrainConfig {
  double base_lr = 1e-4;
  double decay = 0.009;
  DecayMode decay_mode = DecayMode::PerUpdate;
  std::size_t batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  double min_delta = 1e-4;
  LossKind loss = LossKind::Categorical;
  std::uint64_t seed = 0;

  /// Binary loss for two-class tasks, categorical otherwise.
  static TrainConfig for_task(Task task);
  /// Throws ConfigError; `num_classes` checks the loss/class-count pairing.
  void validate(std::size_t num_classes) const;
};

/// Inverse-time decay: base_lr / (1 + decay * t), where t is the update
/// counter (PerUpdate) or the zero-based epoch (PerEpoch).
double learning_rate(const TrainConfig& config, std::uint64_t step, int epoch);

/// Plain SGD without momentum: param -= lr * grad.
template <typename T>
void sgd_step(BasicTensor<T>& param, const BasicTensor<T>& grad, double lr);
template <typename T>
void sgd_step(BasicModel<T>& model, const Gradients<T>& grads, double lr);

/// Loss of softmax scores against label indices and its gradient with respect
/// to the logits. Binary loss scores P(class 0) against label == 0 and chains
/// the cross-entropy gradient through the two-way softmax.
template <typename T>
LossResult<T> task_loss(LossKind kind, const BasicTensor<T>& probs, std::span<const int> labels);

/// Validation-loss early stopping with a minimum improvement.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta);

  /// Records an epoch; returns true when it is the new best.
  bool update(int epoch, double val_loss);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  double min_delta_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_acc;
  int best_epoch = 0;
  int stopped_epoch = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  Model model;
  TrainReport report;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  Tensor scores;  // [N, K]
  std::vector<int> predictions;
};

Evaluation evaluate(const Model& model, const LabeledImages& data, LossKind loss,
                    std::size_t batch_size = 32);

/// Mini-batch SGD with seeded shuffling and dropout, validation after every
/// epoch and early stopping. Returns the parameters of the best validation
/// epoch. Throws TrainingDivergedError on a non-finite loss.
TrainResult train(Model model, const LabeledImages& train_set, const LabeledImages& val_set,
                  const TrainConfig& config);

struct FoldResult {
  TrainReport report;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct CrossValResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation across folds
  double mean_f1 = 0.0;
  double std_f1 = 0.0;

  std::string to_json() const;
};

struct CrossValOptions {
  int k = 9;
  /// Pad each fold's training side with augmented copies of minority classes.
  bool balance = true;
};

/// Trains one fresh model per stratified fold (seeded by config.seed and the
/// fold index) and summarizes validation accuracy and macro F1.
CrossValResult cross_validate(const Dataset& train_val, const ModelConfig& model_config,
                              const TrainConfig& config, const ImageLoader& loader,
                              const CrossValOptions& options = {});

}  // namespace pyroclass
