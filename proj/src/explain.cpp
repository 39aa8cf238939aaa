#include "pyroclass/explain.hpp"

#include <algorithm>
#include <cmath>

#include "pyroclass/error.hpp"
#include "pyroclass/log.hpp"

namespace pyroclass {

std::string_view to_string(CamLayer layer) { return layer == CamLayer::Head1x1 ? "head1x1" : "last3x3"; }

CamLayer parse_cam_layer(std::string_view name) {
  if (name == "head1x1") return CamLayer::Head1x1;
  if (name == "last3x3") return CamLayer::Last3x3;
  throw ConfigError("unknown cam layer '" + std::string(name) + "' (expected head1x1|last3x3)");
}

std::size_t cam_layer_index(const Model& model, CamLayer layer) {
  return layer == CamLayer::Head1x1 ? model.head_conv_index() : model.last_conv3x3_index();
}

CamMap cam_from_activations(const Tensor& activation, const Tensor& gradient, std::size_t out_size) {
  if (activation.rank() != 3 || activation.shape() != gradient.shape()) {
    throw ShapeError("grad-CAM needs matching [C,h,w] activation and gradient, got " +
                     shape_string(activation.shape()) + " and " + shape_string(gradient.shape()));
  }
  const std::size_t c = activation.extent(0), h = activation.extent(1), w = activation.extent(2);
  const std::size_t hw = h * w;
  CamMap map;
  map.channel_weights.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += gradient[ch * hw + i];
    map.channel_weights[ch] = s / static_cast<double>(hw);
  }

  std::vector<float> raw(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    double v = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) v += map.channel_weights[ch] * activation[ch * hw + i];
    raw[i] = static_cast<float>(std::max(v, 0.0));
  }
  auto up = resize_bilinear(raw, w, h, out_size, out_size);
  const float peak = *std::max_element(up.begin(), up.end());
  if (peak > 0.0f) {
    for (auto& v : up) v = std::clamp(v / peak, 0.0f, 1.0f);
  } else {
    std::fill(up.begin(), up.end(), 0.0f);
  }
  map.values = Tensor::from({out_size, out_size}, std::move(up));
  return map;
}

CamMap grad_cam(const Model& model, const Tensor& image, std::size_t class_index, CamLayer layer) {
  if (class_index >= model.config.num_classes) {
    throw LabelError("class index " + std::to_string(class_index) + " out of range for " +
                     std::to_string(model.config.num_classes) + " classes");
  }
  if (model.step == 0) warn("grad-CAM on an untrained model; the map reflects random weights");
  const std::size_t target = cam_layer_index(model, layer);

  ForwardOptions opts;
  opts.retain = true;
  opts.capture_layer = target;
  const Shape& s = image.shape();
  auto fwd = forward(model, image.reshaped({1, s.at(0), s.at(1), s.at(2)}), opts);

  auto grad_logits = Tensor::zeros({1, model.config.num_classes});
  grad_logits[class_index] = 1.0f;
  auto grad = gradient_at(model, fwd.trace, grad_logits, target);

  auto map = cam_from_activations(fwd.captured.slice0(0), grad.slice0(0), model.config.input_size);
  map.class_index = class_index;
  map.layer = layer;
  return map;
}

TopCam cam_for_top_class(const Model& model, const Tensor& image, CamLayer layer) {
  const auto cls = classify(model, image);
  return {cls.index, cls.scores[cls.index], grad_cam(model, image, cls.index, layer)};
}

GrayImage cam_to_gray(const CamMap& map) {
  GrayImage img{map.values.extent(1), map.values.extent(0), {}};
  img.pixels.reserve(map.values.size());
  for (float v : map.values.data()) {
    img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return img;
}

void export_cam(const CamMap& map, const std::filesystem::path& path) { write_pgm(path, cam_to_gray(map)); }

void export_overlay(const CamMap& map, const Tensor& image, const std::filesystem::path& path) {
  const std::size_t h = map.values.extent(0), w = map.values.extent(1);
  if (image.size() != h * w) {
    throw ShapeError("overlay image " + shape_string(image.shape()) + " does not match the map");
  }
  std::vector<std::uint8_t> rgb(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = map.values[i];
    const double g = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    // "hot" colour ramp: black -> red -> yellow -> white
    const double heat[3] = {std::clamp(3.0 * v, 0.0, 1.0), std::clamp(3.0 * v - 1.0, 0.0, 1.0),
                            std::clamp(3.0 * v - 2.0, 0.0, 1.0)};
    for (int ch = 0; ch < 3; ++ch) {
      rgb[i * 3 + ch] = static_cast<std::uint8_t>(std::lround((0.5 * g + 0.5 * heat[ch]) * 255.0));
    }
  }
  write_png_rgb(path, w, h, rgb);
}

}  // namespace pyroclass
