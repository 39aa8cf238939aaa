#include "pyroclass/model.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "pyroclass/error.hpp"

namespace pyroclass {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::size_t, 5> kSectionWidthFactor = {1, 2, 4, 8, 8};
constexpr std::array<int, 5> kSectionConvs = {2, 2, 3, 3, 3};

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Objects: return "objects";
    case Task::Poses: return "poses";
    case Task::Fire: return "fire";
  }
  return "objects";
}

Task parse_task(std::string_view name) {
  if (name == "objects") return Task::Objects;
  if (name == "poses") return Task::Poses;
  if (name == "fire") return Task::Fire;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected objects|poses|fire)");
}

const std::vector<std::string>& class_names(Task task) {
  static const std::vector<std::string> objects = {"door", "firefighter+window", "firefighter",
                                                   "ladder", "window"};
  static const std::vector<std::string> poses = {"crawling", "sitting", "standing"};
  static const std::vector<std::string> fire = {"fire", "no-fire"};
  switch (task) {
    case Task::Objects: return objects;
    case Task::Poses: return poses;
    case Task::Fire: return fire;
  }
  return objects;
}

std::size_t class_count(Task task) { return class_names(task).size(); }

std::size_t head_channels(int depth) {
  if (depth < 1 || depth > 5) throw ConfigError("depth must be 1..5, got " + std::to_string(depth));
  const std::size_t side = 224u >> depth;
  return kFlattenSize224 / (side * side);
}

ModelConfig ModelConfig::make(Task task, int depth) {
  ModelConfig c;
  c.task = task;
  c.depth = depth;
  c.num_classes = class_count(task);
  return c;
}

ModelConfig ModelConfig::tiny(Task task, int depth) {
  auto c = make(task, depth);
  c.input_size = depth >= 5 ? 32 : 16;
  c.base_width = 4;
  c.dense_width = 8;
  return c;
}

void ModelConfig::validate() const {
  if (depth < 1 || depth > 5) throw ConfigError("depth must be 1..5, got " + std::to_string(depth));
  if (num_classes != class_count(task)) {
    throw ConfigError("task " + std::string(to_string(task)) + " has " +
                      std::to_string(class_count(task)) + " classes, config says " +
                      std::to_string(num_classes));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0,1)");
  }
  const std::size_t reduction = std::size_t{1} << depth;
  if (input_size < reduction || input_size % reduction != 0) {
    throw ConfigError("input size " + std::to_string(input_size) + " must be a multiple of " +
                      std::to_string(reduction) + " for depth " + std::to_string(depth));
  }
  if (base_width == 0) throw ConfigError("base width must be >= 1");
  if (dense_width == 0) throw ConfigError("dense width must be >= 1");
}

std::string LayerSpec::name() const {
  std::ostringstream os;
  switch (kind) {
    case LayerKind::Conv: os << "conv" << ksize << 'x' << ksize << '(' << in << "->" << out << ')'; break;
    case LayerKind::Relu: os << "relu"; break;
    case LayerKind::MaxPool: os << "pool"; break;
    case LayerKind::Flatten: os << "flatten(" << out << ')'; break;
    case LayerKind::Dense: os << "dense(" << out << ')'; break;
    case LayerKind::Dropout: os << "dropout"; break;
    case LayerKind::Softmax: os << "softmax"; break;
  }
  return os.str();
}

std::size_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::Conv: return out * in * ksize * ksize + out;
    case LayerKind::Dense: return out * in + out;
    default: return 0;
  }
}

std::vector<LayerSpec> plan_layers(const ModelConfig& config) {
  config.validate();
  std::vector<LayerSpec> plan;
  std::size_t side = config.input_size;
  std::size_t channels = 1;
  for (int s = 0; s < config.depth; ++s) {
    const std::size_t width = config.base_width * kSectionWidthFactor[s];
    for (int c = 0; c < kSectionConvs[s]; ++c) {
      plan.push_back({LayerKind::Conv, channels, width, 3, {width, side, side}});
      plan.push_back({LayerKind::Relu, 0, 0, 0, {width, side, side}});
      channels = width;
    }
    side /= 2;
    plan.push_back({LayerKind::MaxPool, 0, 0, 0, {channels, side, side}});
  }
  const std::size_t head = head_channels(config.depth);
  plan.push_back({LayerKind::Conv, channels, head, 1, {head, side, side}});
  const std::size_t flat = head * side * side;
  plan.push_back({LayerKind::Flatten, flat, flat, 0, {flat}});

  const std::size_t dw = config.dense_width;
  std::size_t features = flat;
  for (int i = 0; i < 2; ++i) {
    plan.push_back({LayerKind::Dense, features, dw, 0, {dw}});
    plan.push_back({LayerKind::Relu, 0, 0, 0, {dw}});
    plan.push_back({LayerKind::Dropout, 0, 0, 0, {dw}});
    features = dw;
  }
  plan.push_back({LayerKind::Dense, features, config.num_classes, 0, {config.num_classes}});
  plan.push_back({LayerKind::Softmax, 0, 0, 0, {config.num_classes}});
  return plan;
}

std::size_t flatten_size(const ModelConfig& config) {
  for (const auto& l : plan_layers(config)) {
    if (l.kind == LayerKind::Flatten) return l.out;
  }
  throw ConfigError("plan has no flatten layer");
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& l : plan_layers(config)) n += l.param_count();
  return n;
}

template <typename T>
std::size_t BasicModel<T>::head_conv_index() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer<T>>(&layers[i]); c && c->params.ksize() == 1) return i;
  }
  throw ConfigError("model has no 1x1 head convolution");
}

template <typename T>
std::size_t BasicModel<T>::last_conv3x3_index() const {
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer<T>>(&layers[i]); c && c->params.ksize() == 3) last = i;
  }
  if (!last || *last + 1 >= layers.size() || !std::holds_alternative<ReluLayer>(layers[*last + 1])) {
    throw ConfigError("model has no 3x3 convolution followed by a ReLU");
  }
  return *last + 1;
}

template <typename T>
std::size_t BasicModel<T>::logits_index() const {
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (std::holds_alternative<DenseLayer<T>>(layers[i])) return i;
  }
  throw ConfigError("model has no dense layer");
}

template <typename T>
BasicModel<T> zero_model(const ModelConfig& config) {
  BasicModel<T> model;
  model.config = config;
  for (const auto& spec : plan_layers(config)) {
    switch (spec.kind) {
      case LayerKind::Conv:
        model.layers.emplace_back(ConvLayer<T>{{BasicTensor<T>::zeros({spec.out, spec.in, spec.ksize, spec.ksize}),
                                                BasicTensor<T>::zeros({spec.out})}});
        break;
      case LayerKind::Dense:
        model.layers.emplace_back(
            DenseLayer<T>{{BasicTensor<T>::zeros({spec.out, spec.in}), BasicTensor<T>::zeros({spec.out})}});
        break;
      case LayerKind::Relu: model.layers.emplace_back(ReluLayer{}); break;
      case LayerKind::MaxPool: model.layers.emplace_back(MaxPoolLayer{}); break;
      case LayerKind::Flatten: model.layers.emplace_back(FlattenLayer{}); break;
      case LayerKind::Dropout: model.layers.emplace_back(DropoutLayer{config.dropout_rate}); break;
      case LayerKind::Softmax: model.layers.emplace_back(SoftmaxLayer{}); break;
    }
  }
  return model;
}

template <typename T>
BasicModel<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  const auto plan = plan_layers(config);
  BasicModel<T> model;
  model.config = config;
  model.seed = seed;
  Rng rng(seed);

  auto normal_fill = [&rng](BasicTensor<T>& t, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  };

  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& spec = plan[i];
    const bool feeds_relu = i + 1 < plan.size() && plan[i + 1].kind == LayerKind::Relu;
    switch (spec.kind) {
      case LayerKind::Conv: {
        ConvParams<T> p{BasicTensor<T>::zeros({spec.out, spec.in, spec.ksize, spec.ksize}),
                        BasicTensor<T>::zeros({spec.out})};
        const double fan_in = static_cast<double>(spec.in * spec.ksize * spec.ksize);
        const double fan_out = static_cast<double>(spec.out * spec.ksize * spec.ksize);
        normal_fill(p.kernels, feeds_relu ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out)));
        model.layers.emplace_back(ConvLayer<T>{std::move(p)});
        break;
      }
      case LayerKind::Dense: {
        DenseParams<T> p{BasicTensor<T>::zeros({spec.out, spec.in}), BasicTensor<T>::zeros({spec.out})};
        const double fan_in = static_cast<double>(spec.in);
        const double fan_out = static_cast<double>(spec.out);
        normal_fill(p.weights, feeds_relu ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out)));
        model.layers.emplace_back(DenseLayer<T>{std::move(p)});
        break;
      }
      case LayerKind::Relu: model.layers.emplace_back(ReluLayer{}); break;
      case LayerKind::MaxPool: model.layers.emplace_back(MaxPoolLayer{}); break;
      case LayerKind::Flatten: model.layers.emplace_back(FlattenLayer{}); break;
      case LayerKind::Dropout: model.layers.emplace_back(DropoutLayer{config.dropout_rate}); break;
      case LayerKind::Softmax: model.layers.emplace_back(SoftmaxLayer{}); break;
    }
  }
  return model;
}

template <typename T>
void for_each_param(BasicModel<T>& model, const std::function<void(BasicTensor<T>&)>& fn) {
  for (auto& layer : model.layers) {
    if (auto* c = std::get_if<ConvLayer<T>>(&layer)) {
      fn(c->params.kernels);
      fn(c->params.bias);
    } else if (auto* d = std::get_if<DenseLayer<T>>(&layer)) {
      fn(d->params.weights);
      fn(d->params.bias);
    }
  }
}

template <typename T>
void for_each_param(const BasicModel<T>& model,
                    const std::function<void(const BasicTensor<T>&)>& fn) {
  for (const auto& layer : model.layers) {
    if (const auto* c = std::get_if<ConvLayer<T>>(&layer)) {
      fn(c->params.kernels);
      fn(c->params.bias);
    } else if (const auto* d = std::get_if<DenseLayer<T>>(&layer)) {
      fn(d->params.weights);
      fn(d->params.bias);
    }
  }
}

template <typename T>
std::size_t param_count(const BasicModel<T>& model) {
  std::size_t n = 0;
  for_each_param(model, std::function<void(const BasicTensor<T>&)>(
                            [&n](const BasicTensor<T>& t) { n += t.size(); }));
  return n;
}

template <typename U, typename T>
BasicModel<U> cast_model(const BasicModel<T>& model) {
  BasicModel<U> out;
  out.config = model.config;
  out.seed = model.seed;
  out.step = model.step;
  for (const auto& layer : model.layers) {
    std::visit(overloaded{
                   [&](const ConvLayer<T>& c) {
                     out.layers.emplace_back(ConvLayer<U>{
                         {c.params.kernels.template cast<U>(), c.params.bias.template cast<U>()}});
                   },
                   [&](const DenseLayer<T>& d) {
                     out.layers.emplace_back(DenseLayer<U>{
                         {d.params.weights.template cast<U>(), d.params.bias.template cast<U>()}});
                   },
                   [&](const auto& other) { out.layers.emplace_back(other); },
               },
               layer);
  }
  return out;
}

template <typename T>
ForwardResult<T> forward(const BasicModel<T>& model, BasicTensor<T> batch,
                         const ForwardOptions& options, Rng* rng) {
  const std::size_t s = model.config.input_size;
  if (batch.rank() != 4 || batch.extent(1) != 1 || batch.extent(2) != s || batch.extent(3) != s) {
    throw ShapeError("model expects a [N,1," + std::to_string(s) + "," + std::to_string(s) +
                     "] batch, got " + shape_string(batch.shape()));
  }
  if (options.training && rng == nullptr) throw ConfigError("training forward needs an rng");
  const bool retain = options.training || options.retain;
  const std::size_t n = batch.extent(0);

  ForwardResult<T> result;
  if (retain) result.trace.caches.resize(model.layers.size());
  BasicTensor<T> x = std::move(batch);

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto keep = [&](auto&& cache) {
      if (retain) result.trace.caches[i] = std::forward<decltype(cache)>(cache);
    };
    std::visit(overloaded{
                   [&](const ConvLayer<T>& c) {
                     auto r = conv2d_forward(std::move(x), c.params);
                     x = std::move(r.output);
                     keep(std::move(r.cache));
                   },
                   [&](const ReluLayer&) {
                     auto r = relu_forward(std::move(x));
                     x = std::move(r.output);
                     keep(std::move(r.cache));
                   },
                   [&](const MaxPoolLayer&) {
                     auto r = maxpool2x2_forward(x);
                     x = std::move(r.output);
                     keep(std::move(r.cache));
                   },
                   [&](const FlattenLayer&) {
                     Shape in = x.shape();
                     const std::size_t f = x.size() / n;
                     x = std::move(x).reshaped({n, f});
                     keep(std::move(in));
                   },
                   [&](const DenseLayer<T>& d) {
                     auto r = dense_forward(std::move(x), d.params);
                     x = std::move(r.output);
                     keep(std::move(r.cache));
                   },
                   [&](const DropoutLayer& d) {
                     Rng dummy;
                     auto r = dropout_forward(std::move(x), d.rate, rng ? *rng : dummy, options.training);
                     x = std::move(r.output);
                     keep(std::move(r.cache));
                   },
                   [&](const SoftmaxLayer&) {
                     result.scores = softmax(x);
                     result.logits = x;
                   },
               },
               model.layers[i]);
    if (options.capture_layer && *options.capture_layer == i) result.captured = x;
  }
  return result;
}

template <typename T>
BasicTensor<T> predict(const BasicModel<T>& model, BasicTensor<T> batch) {
  return forward(model, std::move(batch), ForwardOptions{}).scores;
}

template <typename T>
BasicTensor<T> forward_from(const BasicModel<T>& model, std::size_t layer, BasicTensor<T> activation) {
  const std::size_t last = model.logits_index();
  if (layer >= last) throw ConfigError("forward_from layer must precede the logits layer");
  BasicTensor<T> x = std::move(activation);
  const std::size_t n = x.extent(0);
  for (std::size_t i = layer + 1; i <= last; ++i) {
    std::visit(overloaded{
                   [&](const ConvLayer<T>& c) { x = conv2d_forward(std::move(x), c.params).output; },
                   [&](const ReluLayer&) { x = relu_forward(std::move(x)).output; },
                   [&](const MaxPoolLayer&) { x = maxpool2x2_forward(x).output; },
                   [&](const FlattenLayer&) { x = std::move(x).reshaped({n, x.size() / n}); },
                   [&](const DenseLayer<T>& d) { x = dense_forward(std::move(x), d.params).output; },
                   [&](const DropoutLayer&) {},
                   [&](const SoftmaxLayer&) {},
               },
               model.layers[i]);
  }
  return x;
}

namespace {

template <typename T>
BasicTensor<T> backward_impl(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                             const BasicTensor<T>& grad_logits, std::optional<std::size_t> stop,
                             std::vector<LayerGrads<T>>* param_grads) {
  if (trace.caches.size() != model.layers.size()) {
    throw ConfigError("backward needs a trace retained from a forward pass of this model");
  }
  const std::size_t last = model.logits_index();
  if (stop && *stop > last) throw ConfigError("gradient_at layer lies beyond the logits");
  if (param_grads) param_grads->assign(model.layers.size(), LayerGrads<T>{});

  BasicTensor<T> g = grad_logits;
  for (std::size_t i = last + 1; i-- > 0;) {
    if (stop && *stop == i) return g;
    const auto& cache = trace.caches[i];
    std::visit(overloaded{
                   [&](const ConvLayer<T>& c) {
                     auto r = conv2d_backward(std::get<ConvCache<T>>(cache), c.params, g);
                     g = std::move(r.input);
                     if (param_grads) (*param_grads)[i] = {std::move(r.kernels), std::move(r.bias)};
                   },
                   [&](const ReluLayer&) { g = relu_backward(std::get<ReluCache>(cache), g); },
                   [&](const MaxPoolLayer&) { g = maxpool2x2_backward(std::get<PoolCache>(cache), g); },
                   [&](const FlattenLayer&) { g = std::move(g).reshaped(std::get<Shape>(cache)); },
                   [&](const DenseLayer<T>& d) {
                     auto r = dense_backward(std::get<DenseCache<T>>(cache), d.params, g);
                     g = std::move(r.input);
                     if (param_grads) (*param_grads)[i] = {std::move(r.weights), std::move(r.bias)};
                   },
                   [&](const DropoutLayer&) { g = dropout_backward(std::get<DropoutCache>(cache), g); },
                   [&](const SoftmaxLayer&) {},
               },
               model.layers[i]);
  }
  return g;
}

}  // namespace

template <typename T>
Gradients<T> backward(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                      const BasicTensor<T>& grad_logits) {
  Gradients<T> out;
  out.input = backward_impl(model, trace, grad_logits, std::nullopt, &out.layers);
  return out;
}

template <typename T>
BasicTensor<T> gradient_at(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                           const BasicTensor<T>& grad_logits, std::size_t layer) {
  return backward_impl<T>(model, trace, grad_logits, layer, nullptr);
}

std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t argmax_first(std::span<const float> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

template <typename T>
Classification classify(const BasicModel<T>& model, const BasicTensor<T>& image) {
  const std::size_t s = model.config.input_size;
  if (image.rank() != 3 || image.extent(0) != 1 || image.extent(1) != s || image.extent(2) != s) {
    throw ShapeError("classify expects a [1," + std::to_string(s) + "," + std::to_string(s) +
                     "] image, got " + shape_string(image.shape()));
  }
  auto scores = predict(model, image.reshaped({1, 1, s, s}));
  Classification c;
  c.scores.assign(scores.data().begin(), scores.data().end());
  c.index = argmax_first(std::span<const double>(c.scores));
  return c;
}

#define PYROCLASS_INSTANTIATE_MODEL(T)                                                         \
  template struct BasicModel<T>;                                                               \
  template BasicModel<T> build_model<T>(const ModelConfig&, std::uint64_t);                    \
  template BasicModel<T> zero_model<T>(const ModelConfig&);                                    \
  template std::size_t param_count(const BasicModel<T>&);                                      \
  template void for_each_param(BasicModel<T>&, const std::function<void(BasicTensor<T>&)>&);   \
  template void for_each_param(const BasicModel<T>&,                                           \
                               const std::function<void(const BasicTensor<T>&)>&);             \
  template ForwardResult<T> forward(const BasicModel<T>&, BasicTensor<T>, const ForwardOptions&, \
                                    Rng*);                                                     \
  template BasicTensor<T> predict(const BasicModel<T>&, BasicTensor<T>);                       \
  template BasicTensor<T> forward_from(const BasicModel<T>&, std::size_t, BasicTensor<T>);     \
  template Gradients<T> backward(const BasicModel<T>&, const ForwardTrace<T>&,                 \
                                 const BasicTensor<T>&);                                       \
  template BasicTensor<T> gradient_at(const BasicModel<T>&, const ForwardTrace<T>&,            \
                                      const BasicTensor<T>&, std::size_t);                     \
  template Classification classify(const BasicModel<T>&, const BasicTensor<T>&);

PYROCLASS_INSTANTIATE_MODEL(float)
PYROCLASS_INSTANTIATE_MODEL(double)

#undef PYROCLASS_INSTANTIATE_MODEL

template BasicModel<double> cast_model<double, float>(const BasicModel<float>&);
template BasicModel<float> cast_model<float, double>(const BasicModel<double>&);

}  // namespace pyroclass
