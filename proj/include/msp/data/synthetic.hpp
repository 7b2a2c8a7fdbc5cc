#ifndef MSP_DATA_SYNTHETIC_HPP_
#define MSP_DATA_SYNTHETIC_HPP_

#include <cstdint>

#include "msp/data/sample.hpp"

namespace msp {

/// Configuration of the factored synthetic pedestrian dataset.
///
/// Factor assignment, by construction:
///   - identity   -> face color, skin tone (limbs) and body proportions
///   - clothes    -> torso / pants fill colors and stripe texture
///   - hairstyle  -> hair shape and color
/// plus per-image jitter (position, brightness, pixel noise). Identity is
/// recoverable from face color and shape alone; hair and clothes are decoys.
struct SyntheticConfig {
  int num_identities = 32;
  int clothes_per_identity = 3;
  int hairstyles_per_identity = 3;  // at most 3 (short / medium / long)
  int images_per_combination = 6;
  int image_height = 64;
  int image_width = 32;
  double noise_std = 0.02;
  uint64_t seed = 0;

  void validate() const;
};

/// Renders the full factored dataset. Every sample ships a ground-truth
/// SemanticMap aligned with its image. Deterministic: the same config
/// produces bit-identical samples. Clothes labels are global class ids
/// (identity * clothes_per_identity + local index).
Dataset generate_synthetic_dataset(const SyntheticConfig& config);

/// Face color assigned to an identity (before brightness jitter).
Rgb synthetic_identity_color(uint64_t seed, int identity);

/// Hairstyle every identity keeps across its training images when the
/// single-hairstyle split is used.
Hairstyle canonical_hairstyle(int identity, int num_styles);

/// Deterministic train/test partition of a factored dataset.
///
/// Train keeps, per (identity, clothes, hairstyle) group, the first
/// `train_images_per_combo` samples of groups whose hairstyle matches the
/// identity's canonical style (when `train_single_hairstyle` is set) and
/// whose clothes rank among the identity's first `train_clothes_per_identity`
/// classes (-1 keeps all). Test takes the remaining images of every group,
/// so held-out hairstyles and clothes appear only at test time.
struct FactoredSplitSpec {
  int train_images_per_combo = 4;
  int train_clothes_per_identity = -1;
  bool train_single_hairstyle = true;
};

struct FactoredSplit {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

FactoredSplit factored_split(const Dataset& dataset,
                             const FactoredSplitSpec& spec);

}  // namespace msp

#endif  // MSP_DATA_SYNTHETIC_HPP_
