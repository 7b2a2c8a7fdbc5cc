#include "msp/hsoa/hairstyle.hpp"

#include "msp/core/error.hpp"

namespace msp {

Hairstyle hairstyle_from_string(const std::string& s) {
  if (s == "short") return Hairstyle::kShort;
  if (s == "medium") return Hairstyle::kMedium;
  if (s == "long") return Hairstyle::kLong;
  if (s == "original") return Hairstyle::kOriginal;
  throw ArgumentError("unknown hairstyle '" + s + "'");
}

int style_index(Hairstyle h) {
  switch (h) {
    case Hairstyle::kShort: return 0;
    case Hairstyle::kMedium: return 1;
    case Hairstyle::kLong: return 2;
    case Hairstyle::kOriginal:
      throw ArgumentError("'original' is not a synthesis target style");
  }
  throw ArgumentError("invalid hairstyle value");
}

Hairstyle style_from_index(int index) {
  switch (index) {
    case 0: return Hairstyle::kShort;
    case 1: return Hairstyle::kMedium;
    case 2: return Hairstyle::kLong;
  }
  throw ArgumentError("style index must be in {0,1,2}, got " +
                      std::to_string(index));
}

}  // namespace msp
