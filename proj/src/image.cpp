#include "pyroclass/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"

namespace pyroclass {

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw DecodeError(std::string("PGM: expected ") + what);
    }
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1u << 24)) throw DecodeError(std::string("PGM: ") + what + " too large");
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DecodeError("not a PNM file");
  if (bytes[1] == '6' || bytes[1] == '3') throw DecodeError("PNM: colour images are not supported");
  if (bytes[1] != '5') throw DecodeError("PNM: only binary PGM (P5) is supported");

  PnmReader r(bytes.subspan(2));
  GrayImage img;
  img.width = r.read_uint("width");
  img.height = r.read_uint("height");
  const std::size_t maxval = r.read_uint("maxval");
  if (img.width == 0 || img.height == 0) throw DecodeError("PGM: zero image extent");
  if (maxval == 0 || maxval > 255) throw DecodeError("PGM: only 8-bit maxval (1..255) is supported");
  r.advance();  // single whitespace before the raster

  const std::size_t start = 2 + r.pos();
  const std::size_t n = img.width * img.height;
  if (start > bytes.size() || bytes.size() - start < n) throw DecodeError("PGM: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      if (p > maxval) throw DecodeError("PGM: pixel exceeds maxval");
      p = static_cast<std::uint8_t>(std::lround(p * 255.0 / static_cast<double>(maxval)));
    }
  }
  return img;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 33 || std::memcmp(bytes.data(), kPngSignature, 8) != 0 ||
      std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw DecodeError("not a PNG file");
  }
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (color_type != 0) throw DecodeError("PNG: only single-channel grayscale images are supported");
  if (bit_depth > 8) throw DecodeError("PNG: only 8-bit grayscale images are supported");

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img;
  img.width = image.width;
  img.height = image.height;
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("PNG: " + msg);
  }
  return img;
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw DecodeError(std::string("cannot read image: ") + e.what());
  }
  try {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pgm(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
  throw DecodeError(path.string() + ": unrecognized image format");
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file_atomic(path, encode_pgm(image));
}

void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const std::uint8_t> rgb) {
  if (rgb.size() != width * height * 3) throw ShapeError("write_png_rgb: buffer size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::string buffer(size, '\0');
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  buffer.resize(size);
  write_file_atomic(path, buffer);
}

std::vector<float> resize_bilinear(std::span<const float> src, std::size_t src_width,
                                   std::size_t src_height, std::size_t dst_width,
                                   std::size_t dst_height) {
  if (src.size() != src_width * src_height || src_width == 0 || src_height == 0) {
    throw ShapeError("resize_bilinear: source buffer does not match its extents");
  }
  std::vector<float> dst(dst_width * dst_height);
  if (src_width == dst_width && src_height == dst_height) {
    std::copy(src.begin(), src.end(), dst.begin());
    return dst;
  }
  const double sx_scale = static_cast<double>(src_width) / static_cast<double>(dst_width);
  const double sy_scale = static_cast<double>(src_height) / static_cast<double>(dst_height);

  struct Tap {
    std::size_t i0, i1;
    float t;
  };
  auto taps = [](std::size_t n_dst, std::size_t n_src, double scale) {
    std::vector<Tap> out(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
      const double s = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(n_src - 1));
      const auto i0 = static_cast<std::size_t>(s);
      out[i] = {i0, std::min(i0 + 1, n_src - 1), static_cast<float>(s - static_cast<double>(i0))};
    }
    return out;
  };
  const auto xt = taps(dst_width, src_width, sx_scale);
  const auto yt = taps(dst_height, src_height, sy_scale);

  for (std::size_t y = 0; y < dst_height; ++y) {
    const float* r0 = src.data() + yt[y].i0 * src_width;
    const float* r1 = src.data() + yt[y].i1 * src_width;
    for (std::size_t x = 0; x < dst_width; ++x) {
      const auto& tx = xt[x];
      const float top = r0[tx.i0] + (r0[tx.i1] - r0[tx.i0]) * tx.t;
      const float bottom = r1[tx.i0] + (r1[tx.i1] - r1[tx.i0]) * tx.t;
      dst[y * dst_width + x] = top + (bottom - top) * yt[y].t;
    }
  }
  return dst;
}

Tensor to_input_tensor(const GrayImage& image, std::size_t size) {
  if (image.pixels.size() != image.width * image.height || image.pixels.empty()) {
    throw DecodeError("image buffer does not match its extents");
  }
  std::vector<float> plane(image.pixels.size());
  for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<float>(image.pixels[i] / 255.0);
  auto resized = resize_bilinear(plane, image.width, image.height, size, size);
  for (auto& v : resized) v = std::clamp(v, 0.0f, 1.0f);
  return Tensor::from({1, size, size}, std::move(resized));
}

Tensor decode_and_resize(const std::filesystem::path& path, std::size_t size) {
  return to_input_tensor(read_gray_image(path), size);
}

}  // namespace pyroclass
