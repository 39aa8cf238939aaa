#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pyroclass/tensor.hpp"

namespace pyroclass {

/// 8-bit single-channel raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

/// Binary PGM (P5). Other PNM variants, including colour P6, are rejected.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
/// 8-bit (or lower) grayscale PNG without alpha.
GrayImage decode_png(std::span<const std::uint8_t> bytes);
/// Dispatches on the file signature. Throws DecodeError for unreadable,
/// multi-channel or unsupported files.
GrayImage read_gray_image(const std::filesystem::path& path);

std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// Interleaved 8-bit RGB PNG.
void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const std::uint8_t> rgb);

/// Bilinear resampling of a float plane with half-pixel centres and edge
/// clamping. Interpolates as a + (b - a) t so constant regions stay exact.
std::vector<float> resize_bilinear(std::span<const float> src, std::size_t src_width,
                                   std::size_t src_height, std::size_t dst_width,
                                   std::size_t dst_height);

/// Bilinear resize to size x size and p -> p/255, as a [1,size,size] tensor.
Tensor to_input_tensor(const GrayImage& image, std::size_t size = 224);
Tensor decode_and_resize(const std::filesystem::path& path, std::size_t size = 224);

}  // namespace pyroclass
