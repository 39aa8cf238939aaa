#pragma once

#include "pyroclass/layers.hpp"
#include "pyroclass/tensor.hpp"

namespace pyroclass {

/// Magnitudes for random augmentation. Every range is symmetric about the
/// identity transform.
struct AugmentSpec {
  double rotation_deg = 15.0;   // angle ~ U[-r, r]
  double shear_deg = 10.0;      // shear angle ~ U[-s, s]
  double zoom = 0.1;            // scale ~ U[1-z, 1+z]
  double translate = 0.1;       // shift ~ U[-t, t] * extent
  double crop_fraction = 0.9;   // side of the random crop, in (0.5, 1]

  static AugmentSpec identity() { return {0.0, 0.0, 0.0, 0.0, 1.0}; }
  /// Throws ConfigError for negative ranges, zoom >= 1 or a crop fraction
  /// outside (0.5, 1].
  void validate() const;
};

/// One concrete draw of the augmentation transform.
struct AffineParams {
  double rotation_deg = 0.0;
  double shear_deg = 0.0;
  double zoom = 1.0;
  double tx = 0.0;  // fraction of width
  double ty = 0.0;  // fraction of height
  double crop_fraction = 1.0;
  double crop_x = 0.5;  // placement of the crop window within the free margin, [0,1]
  double crop_y = 0.5;

  bool is_identity() const;
};

AffineParams sample_affine(const AugmentSpec& spec, Rng& rng);

/// Applies rotation, shear and zoom about the image centre, then translation,
/// then crop-and-resize back to the full extent, as a single inverse-mapped
/// bilinear resampling. Off-image samples are zero. Input and output are
/// [1,H,W] with values in [0,1].
Tensor apply_affine(const Tensor& image, const AffineParams& params);

Tensor augment(const Tensor& image, const AugmentSpec& spec, Rng& rng);

}  // namespace pyroclass
