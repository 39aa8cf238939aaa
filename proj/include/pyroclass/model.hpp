#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pyroclass/layers.hpp"
#include "pyroclass/tensor.hpp"

namespace pyroclass {

enum class Task { Objects, Poses, Fire };

std::string_view to_string(Task task);
/// Parses "objects" | "poses" | "fire"; throws ConfigError otherwise.
Task parse_task(std::string_view name);
/// Class names in label-index order.
const std::vector<std::string>& class_names(Task task);
std::size_t class_count(Task task);

/// Channel count of the 1x1 head convolution that keeps the flattened feature
/// size at 25088 for a 224x224 input: 25088 / (224 / 2^depth)^2.
std::size_t head_channels(int depth);

inline constexpr std::size_t kFlattenSize224 = 25088;

/// Architecture descriptor. The defaults give the full-size network; tests and
/// desk-scale runs shrink `input_size`, `base_width` and `dense_width` while
/// keeping the same topology.
struct ModelConfig {
  int depth = 1;
  Task task = Task::Objects;
  std::size_t num_classes = 5;
  double dropout_rate = 0.5;
  std::size_t input_size = 224;
  /// Width of the first section; sections use {1,2,4,8,8} times this.
  std::size_t base_width = 64;
  std::size_t dense_width = 4096;

  static ModelConfig make(Task task, int depth);
  /// 16x16 input, section widths /16, dense width 8.
  static ModelConfig tiny(Task task, int depth);

  /// Throws ConfigError when any field is out of range or inconsistent.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class LayerKind { Conv, Relu, MaxPool, Flatten, Dense, Dropout, Softmax };

/// One entry of an architecture plan: what a layer is and the per-sample
/// shape it produces. Computed without allocating parameters.
struct LayerSpec {
  LayerKind kind;
  std::size_t in = 0;     // channels (conv) or features (dense)
  std::size_t out = 0;
  std::size_t ksize = 0;  // conv only
  Shape output_shape;

  std::string name() const;
  std::size_t param_count() const;
};

std::vector<LayerSpec> plan_layers(const ModelConfig& config);
/// Features entering the first dense layer.
std::size_t flatten_size(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);

template <typename T>
struct ConvLayer {
  ConvParams<T> params;
  bool operator==(const ConvLayer&) const = default;
};
struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};
struct MaxPoolLayer {
  bool operator==(const MaxPoolLayer&) const = default;
};
struct FlattenLayer {
  bool operator==(const FlattenLayer&) const = default;
};
template <typename T>
struct DenseLayer {
  DenseParams<T> params;
  bool operator==(const DenseLayer&) const = default;
};
struct DropoutLayer {
  double rate = 0.5;
  bool operator==(const DropoutLayer&) const = default;
};
struct SoftmaxLayer {
  bool operator==(const SoftmaxLayer&) const = default;
};

template <typename T>
using Layer = std::variant<ConvLayer<T>, ReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer<T>,
                           DropoutLayer, SoftmaxLayer>;

template <typename T>
struct BasicModel {
  ModelConfig config;
  std::vector<Layer<T>> layers;
  std::uint64_t seed = 0;
  /// Optimizer updates applied so far; zero means untrained.
  std::uint64_t step = 0;

  /// Index of the 1x1 head convolution.
  std::size_t head_conv_index() const;
  /// Index of the ReLU following the last 3x3 convolution.
  std::size_t last_conv3x3_index() const;
  /// Index of the final dense layer (its output is the logits).
  std::size_t logits_index() const;

  bool operator==(const BasicModel&) const = default;
};

using Model = BasicModel<float>;

/// Builds the layer stack with seeded initialization: He-normal for layers
/// feeding a ReLU, Glorot-normal for the head conv and classifier, zero biases.
template <typename T = float>
BasicModel<T> build_model(const ModelConfig& config, std::uint64_t seed);

/// Same layer stack with every parameter zero (a target for loading).
template <typename T = float>
BasicModel<T> zero_model(const ModelConfig& config);

template <typename T>
std::size_t param_count(const BasicModel<T>& model);

/// Visits every parameter tensor in declaration order (per layer: kernels or
/// weights, then bias).
template <typename T>
void for_each_param(BasicModel<T>& model, const std::function<void(BasicTensor<T>&)>& fn);
template <typename T>
void for_each_param(const BasicModel<T>& model,
                    const std::function<void(const BasicTensor<T>&)>& fn);

template <typename U, typename T>
BasicModel<U> cast_model(const BasicModel<T>& model);

template <typename T>
using LayerCache = std::variant<std::monostate, ConvCache<T>, ReluCache, PoolCache, Shape,
                                DenseCache<T>, DropoutCache>;

template <typename T>
struct ForwardTrace {
  std::vector<LayerCache<T>> caches;
  bool empty() const { return caches.empty(); }
};

struct ForwardOptions {
  bool training = false;
  /// Keep caches for a backward pass (always on when training).
  bool retain = false;
  /// Store a copy of this layer's output in ForwardResult::captured.
  std::optional<std::size_t> capture_layer;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> logits;  // [N, K]
  BasicTensor<T> scores;  // softmax(logits)
  ForwardTrace<T> trace;
  BasicTensor<T> captured;
};

/// Runs a [N,1,S,S] batch through the network. Training mode applies dropout
/// and needs `rng`. Throws ShapeError on a wrongly shaped batch.
template <typename T>
ForwardResult<T> forward(const BasicModel<T>& model, BasicTensor<T> batch,
                         const ForwardOptions& options, Rng* rng = nullptr);

/// Inference scores for a batch, [N, K].
template <typename T>
BasicTensor<T> predict(const BasicModel<T>& model, BasicTensor<T> batch);

/// Continues an inference pass from the output of `layer` to the logits.
template <typename T>
BasicTensor<T> forward_from(const BasicModel<T>& model, std::size_t layer,
                            BasicTensor<T> activation);

template <typename T>
struct LayerGrads {
  BasicTensor<T> weights;  // kernels or dense weights; empty for param-free layers
  BasicTensor<T> bias;
};

template <typename T>
struct Gradients {
  std::vector<LayerGrads<T>> layers;
  BasicTensor<T> input;
};

/// Backpropagates gradients of a scalar with respect to the logits through a
/// retained trace.
template <typename T>
Gradients<T> backward(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                      const BasicTensor<T>& grad_logits);

/// Gradient with respect to the output of `layer`, stopping there.
template <typename T>
BasicTensor<T> gradient_at(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                           const BasicTensor<T>& grad_logits, std::size_t layer);

struct Classification {
  std::size_t index = 0;
  std::vector<double> scores;
};

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_first(std::span<const double> scores);
std::size_t argmax_first(std::span<const float> scores);

/// Classifies one [1,S,S] image.
template <typename T>
Classification classify(const BasicModel<T>& model, const BasicTensor<T>& image);

}  // namespace pyroclass
