#include "msp/hsoa/augment.hpp"

#include "msp/core/error.hpp"

namespace msp {

Image extract_head(const Image& image, const RegionMasks& masks) {
  if (!image.same_shape(masks.head.height(), masks.head.width())) {
    throw ArgumentError("image and masks disagree on spatial size");
  }
  Image crop(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (masks.head.at(y, x)) {
        for (int c = 0; c < 3; ++c) {
          crop.at(c, y, x) = image.at(c, y, x);
        }
      }
    }
  }
  return crop;
}

Image composite_hair(const Image& image, const MaskGrid& hair_mask,
                     const SynthesizedHead& head) {
  if (!image.same_shape(hair_mask.height(), hair_mask.width()) ||
      !image.same_shape(head.image)) {
    throw ArgumentError(
        "image, hair mask and synthesized head disagree on spatial size");
  }
  Image out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (hair_mask.at(y, x)) {
        for (int c = 0; c < 3; ++c) {
          out.at(c, y, x) = head.image.at(c, y, x);
        }
      }
    }
  }
  return out;
}

AugmentResult augment_identity(const Sample& sample, const RegionMasks& masks,
                               HairSynthesizer& synthesizer,
                               const std::vector<Hairstyle>& styles) {
  AugmentResult result;
  result.empty_hair_mask = true;
  for (int y = 0; y < masks.hair.height() && result.empty_hair_mask; ++y) {
    for (int x = 0; x < masks.hair.width(); ++x) {
      if (masks.hair.at(y, x)) {
        result.empty_hair_mask = false;
        break;
      }
    }
  }

  const Image head_crop = extract_head(sample.image, masks);
  for (Hairstyle style : styles) {
    if (style == Hairstyle::kOriginal) {
      throw ArgumentError(
          "kOriginal is not a synthesis target; the source sample already "
          "carries it");
    }
    SynthesizedHead head;
    try {
      head = synthesizer.synthesize(head_crop, masks, style, sample.id);
    } catch (const Error&) {
      result.skipped_styles.push_back(style);
      continue;
    }
    Sample out = sample;
    out.id = sample.id + "_" + to_string(style);
    out.image = composite_hair(sample.image, masks.hair, head);
    out.hairstyle = style;
    out.view = SampleView::kHsoaAug;
    result.samples.push_back(std::move(out));
  }
  return result;
}

}  // namespace msp
