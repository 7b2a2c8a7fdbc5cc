#include "msp/masks/region_masks.hpp"

#include <algorithm>

#include "msp/core/error.hpp"

namespace msp {

void SemanticMap::validate(const LabelSchema& schema) const {
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      int v = labels.at(y, x);
      if (!schema.known(v)) {
        throw SchemaError("semantic map pixel (" + std::to_string(y) + "," +
                          std::to_string(x) + ") holds unknown label " +
                          std::to_string(v));
      }
    }
  }
}

RegionMasks derive_masks(const SemanticMap& map, const LabelSchema& schema) {
  schema.validate();
  map.validate(schema);

  const int h = map.height();
  const int w = map.width();
  RegionMasks m;
  m.face = MaskGrid(h, w);
  m.hair = MaskGrid(h, w);
  m.head = MaskGrid(h, w);
  m.cloth = MaskGrid(h, w);
  m.limbs = MaskGrid(h, w);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = map.labels.at(y, x);
      const uint8_t in_face = schema.face_set.count(label) ? 1 : 0;
      const uint8_t in_hair = schema.hair_set.count(label) ? 1 : 0;
      m.face.at(y, x) = in_face;
      m.hair.at(y, x) = in_hair;
      m.head.at(y, x) = in_face | in_hair;
      m.cloth.at(y, x) = schema.cloth_set.count(label) ? 1 : 0;
      m.limbs.at(y, x) = schema.limbs_set.count(label) ? 1 : 0;
    }
  }
  return m;
}

MaskGrid dilate_mask(const MaskGrid& mask, int radius) {
  if (radius < 0) {
    throw ArgumentError("dilate_mask: radius must be >= 0, got " +
                        std::to_string(radius));
  }
  if (radius == 0) return mask;

  const int h = mask.height();
  const int w = mask.width();

  // Square structuring element separates into a row pass and a column pass.
  MaskGrid rows(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      uint8_t v = 0;
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w - 1, x + radius);
      for (int xi = x0; xi <= x1 && !v; ++xi) v = mask.at(y, xi);
      rows.at(y, x) = v;
    }
  }
  MaskGrid out(h, w);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      uint8_t v = 0;
      for (int yi = y0; yi <= y1 && !v; ++yi) v = rows.at(yi, x);
      out.at(y, x) = v;
    }
  }
  return out;
}

MaskGrid dilated_cloth(const RegionMasks& masks) {
  return dilate_mask(masks.cloth, masks.dilation_radius_cloth);
}

SoftGrid downsample_mask(const MaskGrid& mask, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) {
    throw ArgumentError("downsample_mask: target dims must be positive");
  }
  const int h = mask.height();
  const int w = mask.width();
  if (target_h > h || target_w > w) {
    throw ArgumentError("downsample_mask: target must not exceed source");
  }

  const double sy = static_cast<double>(h) / target_h;
  const double sx = static_cast<double>(w) / target_w;

  SoftGrid out(target_h, target_w);
  for (int oy = 0; oy < target_h; ++oy) {
    const double y0 = oy * sy;
    const double y1 = (oy + 1) * sy;
    for (int ox = 0; ox < target_w; ++ox) {
      const double x0 = ox * sx;
      const double x1 = (ox + 1) * sx;
      double mass = 0.0;
      double area = 0.0;
      for (int y = static_cast<int>(y0); y < y1 && y < h; ++y) {
        const double wy =
            std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = static_cast<int>(x0); x < x1 && x < w; ++x) {
          const double wx =
              std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          area += wy * wx;
          mass += wy * wx * mask.at(y, x);
        }
      }
      out.at(oy, ox) = area > 0 ? static_cast<float>(mass / area) : 0.f;
    }
  }
  return out;
}

}  // namespace msp
