#ifndef MSP_MASKS_REGION_MASKS_HPP_
#define MSP_MASKS_REGION_MASKS_HPP_

#include "msp/core/grid.hpp"
#include "msp/masks/label_schema.hpp"

namespace msp {

/// Per-pixel label image produced by a human parser (or the synthetic
/// ground-truth renderer). H, W must match the paired image exactly.
struct SemanticMap {
  LabelGrid labels;

  int height() const { return labels.height(); }
  int width() const { return labels.width(); }

  /// Throws SchemaError if any pixel holds a label the schema does not know.
  void validate(const LabelSchema& schema) const;
};

/// Binary region masks derived from a semantic map. head is the pixel-wise
/// OR of face and hair; face and hair come from disjoint label sets so
/// face*hair = 0 everywhere before dilation.
struct RegionMasks {
  MaskGrid face;
  MaskGrid hair;
  MaskGrid head;
  MaskGrid cloth;
  MaskGrid limbs;
  int dilation_radius_cloth = 2;
};

/// Builds the region masks: each mask pixel is 1 iff the map label belongs
/// to the corresponding schema subset.
RegionMasks derive_masks(const SemanticMap& map, const LabelSchema& schema);

/// Chebyshev (square structuring element) dilation: output pixel is 1 iff
/// any input 1-pixel lies within Chebyshev distance `radius`. radius 0 is
/// the identity.
MaskGrid dilate_mask(const MaskGrid& mask, int radius);

/// Convenience: the cloth mask dilated by masks.dilation_radius_cloth.
MaskGrid dilated_cloth(const RegionMasks& masks);

/// Area-weighted downsampling of a mask to target_h x target_w. Each output
/// cell is the mean of the input pixels it covers (fractional coverage at
/// the borders when sizes do not divide evenly); values lie in [0,1].
SoftGrid downsample_mask(const MaskGrid& mask, int target_h, int target_w);

}  // namespace msp

#endif  // MSP_MASKS_REGION_MASKS_HPP_
