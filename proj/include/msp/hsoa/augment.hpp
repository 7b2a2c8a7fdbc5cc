#ifndef MSP_HSOA_AUGMENT_HPP_
#define MSP_HSOA_AUGMENT_HPP_

#include <vector>

#include "msp/data/sample.hpp"
#include "msp/hsoa/hair_synthesizer.hpp"
#include "msp/masks/region_masks.hpp"

namespace msp {

/// Image restricted to the head support: head pixels pass through, the rest
/// is zero. Same spatial size as the input.
Image extract_head(const Image& image, const RegionMasks& masks);

/// Pastes synthesized hair back into the full image:
///   out = hair_mask * synthesized + (1 - hair_mask) * image.
/// Pixels outside the hair mask are bit-identical to the input.
Image composite_hair(const Image& image, const MaskGrid& hair_mask,
                     const SynthesizedHead& head);

/// Output of augmenting one sample across a set of target styles.
struct AugmentResult {
  /// One sample per successfully synthesized style. Identity, clothes and
  /// camera labels are inherited from the source; the hairstyle label is the
  /// target style and the view is kHsoaAug.
  std::vector<Sample> samples;
  /// Styles whose synthesis failed; reported rather than fatal.
  std::vector<Hairstyle> skipped_styles;
  /// True when the source hair mask is empty, in which case every produced
  /// sample is the original image under a new style label.
  bool empty_hair_mask = false;
};

/// Runs the synthesizer for each requested style and composites the result
/// into the source image. Requesting kOriginal is an error: the original is
/// always available as-is.
AugmentResult augment_identity(const Sample& sample, const RegionMasks& masks,
                               HairSynthesizer& synthesizer,
                               const std::vector<Hairstyle>& styles);

}  // namespace msp

#endif  // MSP_HSOA_AUGMENT_HPP_
