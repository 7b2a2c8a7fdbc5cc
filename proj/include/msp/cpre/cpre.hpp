#ifndef MSP_CPRE_CPRE_HPP_
#define MSP_CPRE_CPRE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "msp/core/grid.hpp"
#include "msp/core/image.hpp"
#include "msp/core/rng.hpp"
#include "msp/data/sample.hpp"
#include "msp/masks/label_schema.hpp"

namespace msp {

/// How the keep mask is sampled inside the clothing region.
enum class KeepMode {
  kBernoulli,  // independent per-pixel Bernoulli(r); matches E[keep] = r
  kPatch,      // erase random rectangles until the kept fraction drops to <= r
};

/// How each batch is partitioned into raw and erased samples.
enum class MixAssignment {
  kDeterministicHalf,  // exactly floor(n/2) of each identity erased
  kBernoulli,          // each sample erased independently with p = 1/2
};

std::string to_string(KeepMode mode);
KeepMode keep_mode_from_string(const std::string& name);
std::string to_string(MixAssignment assignment);
MixAssignment mix_assignment_from_string(const std::string& name);

/// Per-pixel keep decision. The grid may hold 1s anywhere; only its values
/// under the cloth mask take effect when applied.
struct KeepMask {
  MaskGrid grid;          // 1 = keep the source pixel, 0 = erase
  double keep_ratio = 1;  // the r this mask was drawn for
  uint64_t seed = 0;      // stream key it was drawn from
};

/// Raw/erased split policy. raw_fraction is fixed at 1/2 by the method and
/// recorded here only so reports can state it.
struct MixPolicy {
  double raw_fraction = 0.5;
  MixAssignment assignment = MixAssignment::kDeterministicHalf;
};

/// Everything the erasing stage needs from configuration.
struct CpreConfig {
  bool enabled = true;
  double keep_min = 0.1;
  double keep_max = 0.3;
  KeepMode mode = KeepMode::kBernoulli;
  Rgb fill = {0.0f, 0.0f, 0.0f};
  MixPolicy mix;
  int cloth_dilation_radius = 2;

  void validate() const;
};

/// Draws a keep mask for ratio r. In Bernoulli mode every pixel is kept
/// independently with probability r (sampled over the full grid; only cloth
/// pixels matter downstream). In patch mode rectangles inside the cloth
/// bounding box are erased until the kept fraction inside cloth first drops
/// to <= r. Deterministic given the stream.
KeepMask sample_keep_mask(const MaskGrid& cloth_mask, double r, RngStream rng,
                          KeepMode mode = KeepMode::kBernoulli);

/// Pixel-wise three-case rule: outside cloth -> unchanged; inside cloth with
/// keep=1 -> unchanged; inside cloth with keep=0 -> fill.
Image apply_cpre(const Image& image, const MaskGrid& cloth_mask,
                 const KeepMask& keep, const Rgb& fill = {0.0f, 0.0f, 0.0f});

/// Splits a batch into raw and erased views. Under kDeterministicHalf,
/// exactly floor(n/2) of each identity's n samples are erased (ties favor
/// raw); which ones is a seeded choice. Each erased sample draws its own
/// keep ratio uniformly from [keep_min, keep_max] and erases inside its
/// dilated cloth mask. Samples without a semantic map pass through raw and
/// count toward the raw half. Erased samples get view kErased; the rest
/// keep their view. Per-sample RNG streams are derived from `rng` by batch
/// position, so batch construction may be parallelized.
std::vector<Sample> mix_batch(const std::vector<Sample>& samples,
                              const CpreConfig& config,
                              const LabelSchema& schema, RngStream rng);

}  // namespace msp

#endif  // MSP_CPRE_CPRE_HPP_
