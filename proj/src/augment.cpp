#include "pyroclass/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pyroclass/error.hpp"

namespace pyroclass {

namespace {

double uniform_sym(Rng& rng, double r) { return r == 0.0 ? 0.0 : (2.0 * uniform01(rng) - 1.0) * r; }

// Coordinates within this distance of an integer are treated as exact grid
// hits; right-angle rotations otherwise pick up ~1e-15 noise from cos(90deg).
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

void AugmentSpec::validate() const {
  if (rotation_deg < 0 || shear_deg < 0 || zoom < 0 || translate < 0) {
    throw ConfigError("augmentation ranges must be non-negative");
  }
  if (zoom >= 1.0) throw ConfigError("zoom range must be below 1");
  if (shear_deg >= 90.0) throw ConfigError("shear range must be below 90 degrees");
  if (!(crop_fraction > 0.5 && crop_fraction <= 1.0)) {
    throw ConfigError("crop fraction must be in (0.5, 1]");
  }
}

bool AffineParams::is_identity() const {
  return rotation_deg == 0.0 && shear_deg == 0.0 && zoom == 1.0 && tx == 0.0 && ty == 0.0 &&
         crop_fraction == 1.0;
}

AffineParams sample_affine(const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  AffineParams p;
  p.rotation_deg = uniform_sym(rng, spec.rotation_deg);
  p.shear_deg = uniform_sym(rng, spec.shear_deg);
  p.zoom = 1.0 + uniform_sym(rng, spec.zoom);
  p.tx = uniform_sym(rng, spec.translate);
  p.ty = uniform_sym(rng, spec.translate);
  p.crop_fraction = spec.crop_fraction;
  p.crop_x = uniform01(rng);
  p.crop_y = uniform01(rng);
  return p;
}

Tensor apply_affine(const Tensor& image, const AffineParams& params) {
  if (image.rank() != 3 || image.extent(0) != 1) {
    throw ShapeError("augment expects a [1,H,W] image, got " + shape_string(image.shape()));
  }
  if (params.is_identity()) return image;

  const std::size_t h = image.extent(1), w = image.extent(2);
  const double wd = static_cast<double>(w), hd = static_cast<double>(h);
  const double cx = (wd - 1.0) / 2.0, cy = (hd - 1.0) / 2.0;

  // Forward map A = R(theta) * Shear(phi) * zoom; sample through its inverse.
  const double th = params.rotation_deg * std::numbers::pi / 180.0;
  const double sh = std::tan(params.shear_deg * std::numbers::pi / 180.0);
  const double c = std::cos(th), s = std::sin(th);
  const double a00 = c * params.zoom, a01 = (c * sh - s) * params.zoom;
  const double a10 = s * params.zoom, a11 = (s * sh + c) * params.zoom;
  const double det = a00 * a11 - a01 * a10;
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;

  const double cw = params.crop_fraction * wd, chh = params.crop_fraction * hd;
  const double x0 = params.crop_x * (wd - cw), y0 = params.crop_y * (hd - chh);
  const double tx = params.tx * wd, ty = params.ty * hd;

  auto out = Tensor::zeros({1, h, w});
  const float* src = image.raw();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = x0 + (static_cast<double>(x) + 0.5) * cw / wd - 0.5 - cx - tx;
      const double v = y0 + (static_cast<double>(y) + 0.5) * chh / hd - 0.5 - cy - ty;
      const double sx = snap(i00 * u + i01 * v + cx);
      const double sy = snap(i10 * u + i11 * v + cy);
      if (sx < 0.0 || sy < 0.0 || sx > wd - 1.0 || sy > hd - 1.0) continue;
      const auto xi = static_cast<std::size_t>(sx);
      const auto yi = static_cast<std::size_t>(sy);
      const std::size_t xj = std::min(xi + 1, w - 1), yj = std::min(yi + 1, h - 1);
      const float fx = static_cast<float>(sx - static_cast<double>(xi));
      const float fy = static_cast<float>(sy - static_cast<double>(yi));
      const float p00 = src[yi * w + xi], p01 = src[yi * w + xj];
      const float p10 = src[yj * w + xi], p11 = src[yj * w + xj];
      const float top = p00 + (p01 - p00) * fx;
      const float bottom = p10 + (p11 - p10) * fx;
      out[y * w + x] = std::clamp(top + (bottom - top) * fy, 0.0f, 1.0f);
    }
  }
  return out;
}

Tensor augment(const Tensor& image, const AugmentSpec& spec, Rng& rng) {
  return apply_affine(image, sample_affine(spec, rng));
}

}  // namespace pyroclass
