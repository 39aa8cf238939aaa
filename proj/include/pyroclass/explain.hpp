#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "pyroclass/image.hpp"
#include "pyroclass/model.hpp"

namespace pyroclass {

enum class CamLayer { Head1x1, Last3x3 };

std::string_view to_string(CamLayer layer);
/// "head1x1" | "last3x3"; throws ConfigError otherwise.
CamLayer parse_cam_layer(std::string_view name);
/// Index of the layer whose output the map is built from.
std::size_t cam_layer_index(const Model& model, CamLayer layer);

struct CamMap {
  Tensor values;  // [S,S], in [0,1]
  std::size_t class_index = 0;
  CamLayer layer = CamLayer::Head1x1;
  /// Spatial mean of the logit gradient per channel.
  std::vector<double> channel_weights;
};

/// Map from one sample's activations and logit gradients (both [C,h,w]):
/// ReLU(sum_c alpha_c A_c), bilinearly upsampled to out_size and divided by
/// its maximum. An all-zero map stays zero.
CamMap cam_from_activations(const Tensor& activation, const Tensor& gradient, std::size_t out_size);

/// Grad-CAM of the pre-softmax logit of `class_index` for a [1,S,S] image.
/// Warns when the model has never been trained.
CamMap grad_cam(const Model& model, const Tensor& image, std::size_t class_index,
                CamLayer layer = CamLayer::Head1x1);

struct TopCam {
  std::size_t class_index = 0;
  double score = 0.0;
  CamMap map;
};

TopCam cam_for_top_class(const Model& model, const Tensor& image, CamLayer layer = CamLayer::Head1x1);

/// round(value * 255) per pixel.
GrayImage cam_to_gray(const CamMap& map);
void export_cam(const CamMap& map, const std::filesystem::path& path);
/// Source image (a [1,S,S] tensor in [0,1]) blended 50/50 with a heat
/// colouring of the map, written as RGB PNG.
void export_overlay(const CamMap& map, const Tensor& image, const std::filesystem::path& path);

}  // namespace pyroclass
