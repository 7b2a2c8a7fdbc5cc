#ifndef MSP_HSOA_HAIRSTYLE_HPP_
#define MSP_HSOA_HAIRSTYLE_HPP_

#include <string>

namespace msp {

/// Hairstyle tag carried by every sample. kOriginal marks samples whose
/// hairstyle is simply "as captured" (no known style class); synthesized
/// samples always carry one of the three target styles. The synthetic
/// generator knows the style it rendered, so its samples carry true styles.
enum class Hairstyle { kShort, kMedium, kLong, kOriginal };

inline std::string to_string(Hairstyle h) {
  switch (h) {
    case Hairstyle::kShort: return "short";
    case Hairstyle::kMedium: return "medium";
    case Hairstyle::kLong: return "long";
    case Hairstyle::kOriginal: return "original";
  }
  return "original";
}

Hairstyle hairstyle_from_string(const std::string& s);

/// Index of a style among the three synthesis targets (short=0, medium=1,
/// long=2). kOriginal has no index.
int style_index(Hairstyle h);
Hairstyle style_from_index(int index);

}  // namespace msp

#endif  // MSP_HSOA_HAIRSTYLE_HPP_
