#include "msp/hsoa/hair_synthesizer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "msp/core/error.hpp"
#include "msp/core/png_io.hpp"
#include "msp/core/rng.hpp"

namespace msp {

namespace {

// Fraction of the hair-support bounding box (top-down) each style keeps.
float style_row_coverage(Hairstyle style) {
  switch (style) {
    case Hairstyle::kShort:
      return 0.40f;
    case Hairstyle::kMedium:
      return 0.75f;
    case Hairstyle::kLong:
      return 1.0f;
    case Hairstyle::kOriginal:
      break;
  }
  throw ArgumentError("cannot synthesize the original hairstyle");
}

// Neutral tone revealed where a shorter style vacates the hair support.
constexpr Rgb kVacatedTone = {0.72f, 0.72f, 0.74f};

}  // namespace

const std::array<Rgb, 3>& hair_style_palette() {
  // Dark blue-black, auburn, blonde; snapped to 8-bit representable values.
  static const std::array<Rgb, 3> palette = {
      Rgb{30.0f / 255.0f, 26.0f / 255.0f, 48.0f / 255.0f},
      Rgb{128.0f / 255.0f, 52.0f / 255.0f, 30.0f / 255.0f},
      Rgb{219.0f / 255.0f, 188.0f / 255.0f, 106.0f / 255.0f}};
  return palette;
}

SynthesizedHead ProceduralStubSynthesizer::synthesize(
    const Image& head_crop, const RegionMasks& head_masks, Hairstyle style,
    const std::string& sample_id) {
  if (!supports(style)) {
    throw ArgumentError("procedural stub cannot synthesize style '" +
                        to_string(style) + "'");
  }
  if (head_crop.height() != head_masks.hair.height() ||
      head_crop.width() != head_masks.hair.width()) {
    throw ArgumentError("head crop and masks disagree on spatial size");
  }

  const int h = head_crop.height();
  const int w = head_crop.width();

  // Bounding rows of the hair support; empty support degenerates to a
  // face-only pass-through.
  int top = h, bottom = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (head_masks.hair.at(y, x)) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
      }
    }
  }
  const bool has_hair = top <= bottom;

  SynthesizedHead out;
  out.style = style;
  out.source_sample_id = sample_id;
  out.image = Image(h, w);

  int covered_rows = 0;
  if (has_hair) {
    const int span = bottom - top + 1;
    covered_rows = std::max(
        1, static_cast<int>(std::lround(style_row_coverage(style) * span)));
  }

  const Rgb& color = hair_style_palette()[style_index(style)];
  RngStream shade =
      RngStream(hash_str(sample_id)).derive("stub-shade", style_index(style));

  for (int y = 0; y < h; ++y) {
    // Per-row brightness wobble gives the recolored hair some texture while
    // staying a pure function of (sample_id, style, row).
    const float wobble =
        1.0f +
        0.16f * (static_cast<float>(shade.derive("row", y).uniform()) - 0.5f);
    for (int x = 0; x < w; ++x) {
      if (head_masks.face.at(y, x)) {
        // Identity-bearing pixels pass through untouched.
        for (int c = 0; c < 3; ++c) {
          out.image.at(c, y, x) = head_crop.at(c, y, x);
        }
      } else if (head_masks.hair.at(y, x)) {
        const bool covered = has_hair && (y - top) < covered_rows;
        for (int c = 0; c < 3; ++c) {
          const float v =
              covered ? std::clamp(color[static_cast<size_t>(c)] * wobble,
                                   0.0f, 1.0f)
                      : kVacatedTone[static_cast<size_t>(c)];
          out.image.at(c, y, x) = v;
        }
      }
      // Outside the head support the crop stays zero.
    }
  }
  out.image.quantize_to_8bit();

  // Face pixels must come through exactly, including any crop values that
  // are not 8-bit representable, so restore them after quantization.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (head_masks.face.at(y, x)) {
        for (int c = 0; c < 3; ++c) {
          out.image.at(c, y, x) = head_crop.at(c, y, x);
        }
      }
    }
  }
  return out;
}

SynthesizedHead FileAdapterSynthesizer::synthesize(
    const Image& head_crop, const RegionMasks& head_masks, Hairstyle style,
    const std::string& sample_id) {
  if (!supports(style)) {
    throw ArgumentError("file adapter cannot synthesize style '" +
                        to_string(style) + "'");
  }
  const std::filesystem::path path = std::filesystem::path(root_) /
                                     sample_id / (to_string(style) + ".png");
  if (!std::filesystem::exists(path)) {
    throw DataError("synthesized head not found: " + path.string());
  }
  SynthesizedHead out;
  out.image = read_rgb_png(path.string());
  if (!out.image.same_shape(head_crop)) {
    throw DataError("synthesized head " + path.string() +
                    " does not match the head crop size");
  }
  out.style = style;
  out.source_sample_id = sample_id;
  (void)head_masks;
  return out;
}

}  // namespace msp
