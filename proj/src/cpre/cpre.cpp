#include "msp/cpre/cpre.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "msp/core/error.hpp"
#include "msp/masks/region_masks.hpp"

namespace msp {

std::string to_string(KeepMode mode) {
  switch (mode) {
    case KeepMode::kBernoulli: return "bernoulli";
    case KeepMode::kPatch: return "patch";
  }
  throw ArgumentError("unknown keep mode");
}

KeepMode keep_mode_from_string(const std::string& name) {
  if (name == "bernoulli") return KeepMode::kBernoulli;
  if (name == "patch") return KeepMode::kPatch;
  throw ConfigError("unknown cpre mode '" + name +
                    "' (expected 'bernoulli' or 'patch')");
}

std::string to_string(MixAssignment assignment) {
  switch (assignment) {
    case MixAssignment::kDeterministicHalf: return "half";
    case MixAssignment::kBernoulli: return "bernoulli";
  }
  throw ArgumentError("unknown mix assignment");
}

MixAssignment mix_assignment_from_string(const std::string& name) {
  if (name == "half") return MixAssignment::kDeterministicHalf;
  if (name == "bernoulli") return MixAssignment::kBernoulli;
  throw ConfigError("unknown cpre mix '" + name +
                    "' (expected 'half' or 'bernoulli')");
}

void CpreConfig::validate() const {
  if (keep_min < 0 || keep_max > 1 || keep_min > keep_max) {
    throw ConfigError("cpre keep range must satisfy 0 <= keep_min <= "
                      "keep_max <= 1");
  }
  if (cloth_dilation_radius < 0) {
    throw ConfigError("cpre cloth dilation radius must be >= 0");
  }
}

namespace {

KeepMask bernoulli_keep_mask(const MaskGrid& cloth_mask, double r,
                             RngStream& rng) {
  KeepMask keep;
  keep.grid = MaskGrid(cloth_mask.height(), cloth_mask.width(), 0);
  for (int y = 0; y < cloth_mask.height(); ++y) {
    for (int x = 0; x < cloth_mask.width(); ++x) {
      keep.grid.at(y, x) = rng.bernoulli(r) ? 1 : 0;
    }
  }
  return keep;
}

KeepMask patch_keep_mask(const MaskGrid& cloth_mask, double r,
                         RngStream& rng) {
  KeepMask keep;
  keep.grid = MaskGrid(cloth_mask.height(), cloth_mask.width(), 1);

  // Bounding box and pixel count of the cloth support.
  int y0 = cloth_mask.height(), y1 = -1, x0 = cloth_mask.width(), x1 = -1;
  long cloth_px = 0;
  for (int y = 0; y < cloth_mask.height(); ++y) {
    for (int x = 0; x < cloth_mask.width(); ++x) {
      if (cloth_mask.at(y, x)) {
        ++cloth_px;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
    }
  }
  if (cloth_px == 0) return keep;  // nothing to erase

  const int bh = y1 - y0 + 1;
  const int bw = x1 - x0 + 1;
  long kept = cloth_px;
  const long target =
      static_cast<long>(std::floor(r * static_cast<double>(cloth_px)));

  // Accumulate rectangles until the kept fraction first drops to <= r.
  // The iteration cap only guards against degenerate configurations; each
  // rectangle has positive probability of covering fresh cloth pixels.
  for (int iter = 0; iter < 100000 && kept > target; ++iter) {
    const int rh = 1 + static_cast<int>(rng.uniform_int(
                           static_cast<uint64_t>(std::max(1, bh / 2))));
    const int rw = 1 + static_cast<int>(rng.uniform_int(
                           static_cast<uint64_t>(std::max(1, bw / 2))));
    const int ry = y0 + static_cast<int>(rng.uniform_int(
                            static_cast<uint64_t>(bh)));
    const int rx = x0 + static_cast<int>(rng.uniform_int(
                            static_cast<uint64_t>(bw)));
    for (int y = ry; y < std::min(ry + rh, y1 + 1) && kept > target; ++y) {
      for (int x = rx; x < std::min(rx + rw, x1 + 1) && kept > target; ++x) {
        if (keep.grid.at(y, x) && cloth_mask.at(y, x)) {
          keep.grid.at(y, x) = 0;
          --kept;
        } else {
          keep.grid.at(y, x) = 0;  // outside cloth: value has no effect
        }
      }
    }
  }
  return keep;
}

}  // namespace

KeepMask sample_keep_mask(const MaskGrid& cloth_mask, double r, RngStream rng,
                          KeepMode mode) {
  if (r < 0 || r > 1) {
    throw ArgumentError("keep ratio must lie in [0,1], got " +
                        std::to_string(r));
  }
  KeepMask keep = mode == KeepMode::kBernoulli
                      ? bernoulli_keep_mask(cloth_mask, r, rng)
                      : patch_keep_mask(cloth_mask, r, rng);
  keep.keep_ratio = r;
  keep.seed = rng.key();
  return keep;
}

Image apply_cpre(const Image& image, const MaskGrid& cloth_mask,
                 const KeepMask& keep, const Rgb& fill) {
  if (!image.same_shape(cloth_mask.height(), cloth_mask.width()) ||
      !cloth_mask.same_shape(keep.grid)) {
    throw ArgumentError("image, cloth mask and keep mask disagree on "
                        "spatial size");
  }
  Image out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (cloth_mask.at(y, x) && !keep.grid.at(y, x)) {
        for (int c = 0; c < 3; ++c) {
          out.at(c, y, x) = fill[static_cast<size_t>(c)];
        }
      }
    }
  }
  return out;
}

std::vector<Sample> mix_batch(const std::vector<Sample>& samples,
                              const CpreConfig& config,
                              const LabelSchema& schema, RngStream rng) {
  config.validate();
  std::vector<Sample> out = samples;
  if (!config.enabled || samples.empty()) return out;

  // Decide who gets erased.
  std::vector<char> erase(samples.size(), 0);
  if (config.mix.assignment == MixAssignment::kDeterministicHalf) {
    // Group batch positions by identity; erase a seeded-random floor(n/2)
    // subset of each group, restricted to samples that carry a mask.
    std::map<int, std::vector<size_t>> by_identity;
    for (size_t i = 0; i < samples.size(); ++i) {
      by_identity[samples[i].identity].push_back(i);
    }
    for (auto& [identity, positions] : by_identity) {
      const size_t target = positions.size() / 2;  // ties favor raw
      std::vector<size_t> eligible;
      for (size_t pos : positions) {
        if (samples[pos].semantic_map.has_value()) eligible.push_back(pos);
      }
      RngStream pick = rng.derive("mix-identity", identity);
      pick.shuffle(eligible);
      for (size_t j = 0; j < std::min(target, eligible.size()); ++j) {
        erase[eligible[j]] = 1;
      }
    }
  } else {
    RngStream pick = rng.derive("mix-bernoulli");
    for (size_t i = 0; i < samples.size(); ++i) {
      erase[i] = samples[i].semantic_map.has_value() &&
                 pick.bernoulli(1.0 - config.mix.raw_fraction);
    }
  }

  for (size_t i = 0; i < samples.size(); ++i) {
    if (!erase[i]) continue;
    RngStream stream = rng.derive("sample", i);
    const double r = stream.uniform_in(config.keep_min, config.keep_max);
    const RegionMasks masks = derive_masks(*samples[i].semantic_map, schema);
    MaskGrid dilated = dilate_mask(masks.cloth, config.cloth_dilation_radius);
    const KeepMask keep =
        sample_keep_mask(dilated, r, stream.derive("keep"), config.mode);
    out[i].image = apply_cpre(samples[i].image, dilated, keep, config.fill);
    out[i].view = SampleView::kErased;
  }
  return out;
}

}  // namespace msp
