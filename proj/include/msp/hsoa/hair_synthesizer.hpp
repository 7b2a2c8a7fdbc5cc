#ifndef MSP_HSOA_HAIR_SYNTHESIZER_HPP_
#define MSP_HSOA_HAIR_SYNTHESIZER_HPP_

#include <array>
#include <string>

#include "msp/core/image.hpp"
#include "msp/hsoa/hairstyle.hpp"
#include "msp/masks/region_masks.hpp"

namespace msp {

/// A head with its hair re-synthesized to a target style. The image is zero
/// outside the head support; face pixels are unchanged from the source head
/// crop (exactly so for the procedural stub).
struct SynthesizedHead {
  Image image;
  Hairstyle style = Hairstyle::kOriginal;
  std::string source_sample_id;
};

/// Display colors of the three target styles (short, medium, long). Shared
/// by the procedural stub and the synthetic dataset renderer so synthesized
/// hair matches the corresponding natural style.
const std::array<Rgb, 3>& hair_style_palette();

/// Produces style-conditioned heads from a head crop and its masks. The
/// heavy generative model sits behind this interface; in-process
/// implementations are the procedural stub and a loader for precomputed
/// outputs.
class HairSynthesizer {
 public:
  virtual ~HairSynthesizer() = default;

  virtual SynthesizedHead synthesize(const Image& head_crop,
                                     const RegionMasks& head_masks,
                                     Hairstyle style,
                                     const std::string& sample_id) = 0;

  virtual bool supports(Hairstyle style) const {
    return style != Hairstyle::kOriginal;
  }
};

/// Deterministic stand-in synthesizer: recolors and reshapes the hair
/// region to style-specific template geometry (a style-dependent fraction
/// of the hair support, top-down, in the style color), leaves face pixels
/// exactly unchanged, and fills the vacated hair support with a neutral
/// tone. Output depends only on (sample_id, style) and the inputs.
class ProceduralStubSynthesizer : public HairSynthesizer {
 public:
  SynthesizedHead synthesize(const Image& head_crop,
                             const RegionMasks& head_masks, Hairstyle style,
                             const std::string& sample_id) override;
};

/// Loads precomputed synthesized heads from
///   <root>/<sample_id>/<style>.png  (RGB PNG, same H x W as the crop).
/// Intended for offline GAN output dropped into that layout.
class FileAdapterSynthesizer : public HairSynthesizer {
 public:
  explicit FileAdapterSynthesizer(std::string root) : root_(std::move(root)) {}

  SynthesizedHead synthesize(const Image& head_crop,
                             const RegionMasks& head_masks, Hairstyle style,
                             const std::string& sample_id) override;

 private:
  std::string root_;
};

}  // namespace msp

#endif  // MSP_HSOA_HAIR_SYNTHESIZER_HPP_
