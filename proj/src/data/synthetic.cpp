#include "msp/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"
#include "msp/hsoa/hair_synthesizer.hpp"

namespace msp {

namespace {

// Label ids from the default 20-class schema.
constexpr uint8_t kBackground = 0;
constexpr uint8_t kHair = 2;
constexpr uint8_t kUpperClothes = 5;
constexpr uint8_t kPants = 9;
constexpr uint8_t kFace = 13;
constexpr uint8_t kLeftArm = 14;
constexpr uint8_t kRightArm = 15;
constexpr uint8_t kLeftLeg = 16;
constexpr uint8_t kRightLeg = 17;

constexpr int kJitterPx = 2;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double r = 0, g = 0, b = 0;
  int i = static_cast<int>(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1.0 - s);
  double q = v * (1.0 - f * s);
  double t = v * (1.0 - (1.0 - f) * s);
  switch (i % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    case 5: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g),
          static_cast<float>(b)};
}

Rgb scale(const Rgb& c, float f) { return {c[0] * f, c[1] * f, c[2] * f}; }

double frac(double v) { return v - std::floor(v); }

struct IdentityFactors {
  Rgb face_color;
  double head_scale;   // head radius multiplier
  double body_width;   // torso width as fraction of image width
  double torso_height; // torso height as fraction of image height
};

IdentityFactors identity_factors(uint64_t seed, int identity) {
  RngStream rng = RngStream(seed).derive("identity", identity);
  IdentityFactors f;
  // Golden-ratio hue spacing keeps face colors distinct across identities.
  double hue = frac(0.61803398875 * identity + rng.uniform() * 0.02 + 0.11);
  double sat = 0.55 + 0.30 * frac(0.37 * identity + 0.29);
  double val = 0.70 + 0.25 * frac(0.53 * identity + 0.41);
  f.face_color = hsv_to_rgb(hue, sat, val);
  f.head_scale = rng.uniform_in(0.85, 1.15);
  f.body_width = rng.uniform_in(0.42, 0.65);
  f.torso_height = rng.uniform_in(0.28, 0.36);
  return f;
}

struct ClothesFactors {
  Rgb upper_a, upper_b;
  Rgb lower_a, lower_b;
  int period;
  bool vertical;
};

ClothesFactors clothes_factors(uint64_t seed, int clothes_class) {
  RngStream rng = RngStream(seed).derive("clothes", clothes_class);
  ClothesFactors f;
  double hue = rng.uniform();
  f.upper_a = hsv_to_rgb(hue, rng.uniform_in(0.55, 0.9),
                         rng.uniform_in(0.55, 0.95));
  f.upper_b = hsv_to_rgb(frac(hue + rng.uniform_in(0.15, 0.5)),
                         rng.uniform_in(0.45, 0.85),
                         rng.uniform_in(0.35, 0.85));
  double hue2 = rng.uniform();
  f.lower_a = hsv_to_rgb(hue2, rng.uniform_in(0.4, 0.8),
                         rng.uniform_in(0.3, 0.8));
  f.lower_b = hsv_to_rgb(frac(hue2 + 0.07), rng.uniform_in(0.3, 0.7),
                         rng.uniform_in(0.25, 0.7));
  f.period = 2 + static_cast<int>(rng.uniform_int(3));
  f.vertical = rng.bernoulli(0.5);
  return f;
}

struct Geometry {
  int head_cy, head_r, hair_th;
  int torso_top, torso_bottom, torso_halfw;
  int arm_w, arm_bottom;
  int pants_bottom, legs_bottom, leg_halfw, leg_gap;
};

Geometry layout(const SyntheticConfig& cfg, const IdentityFactors& f) {
  const int h = cfg.image_height;
  const int w = cfg.image_width;
  Geometry g;
  g.head_cy = static_cast<int>(std::lround(h * 0.19));
  g.head_r = std::max(2, static_cast<int>(std::lround(h * 0.07 * f.head_scale)));
  g.hair_th = std::max(2, static_cast<int>(std::lround(g.head_r * 0.55)));
  g.torso_top = g.head_cy + g.head_r + 1;
  const int torso_h = static_cast<int>(std::lround(h * f.torso_height));
  g.torso_bottom = g.torso_top + torso_h;
  g.torso_halfw = std::max(2, static_cast<int>(std::lround(w * f.body_width / 2)));
  g.arm_w = std::max(1, static_cast<int>(std::lround(w * 0.08)));
  g.arm_bottom = g.torso_top + static_cast<int>(std::lround(torso_h * 0.8));
  g.legs_bottom = static_cast<int>(std::lround(h * 0.92));
  g.pants_bottom = g.torso_bottom + static_cast<int>(std::lround(
                                        0.55 * (g.legs_bottom - g.torso_bottom)));
  g.leg_halfw = std::max(1, static_cast<int>(std::lround(g.torso_halfw * 0.4)));
  g.leg_gap = std::max(1, static_cast<int>(std::lround(g.torso_halfw * 0.25)));
  return g;
}

void check_fits(const SyntheticConfig& cfg) {
  // Worst case over identity factors, with full jitter.
  IdentityFactors worst;
  worst.head_scale = 1.15;
  worst.body_width = 0.65;
  worst.torso_height = 0.36;
  Geometry g = layout(cfg, worst);
  const int cx = cfg.image_width / 2;
  const bool ok = g.head_cy - g.head_r - g.hair_th - kJitterPx >= 0 &&
                  g.legs_bottom + kJitterPx <= cfg.image_height - 1 &&
                  cx - g.torso_halfw - g.arm_w - kJitterPx >= 0 &&
                  cx + g.torso_halfw + g.arm_w + kJitterPx <=
                      cfg.image_width - 1;
  if (!ok) {
    throw ConfigError("synthetic image size " +
                      std::to_string(cfg.image_height) + "x" +
                      std::to_string(cfg.image_width) +
                      " is too small to place all person parts");
  }
}

struct Painter {
  LabelGrid& labels;
  int h, w;

  void rect(int y0, int y1, int x0, int x1, uint8_t label) {
    y0 = std::max(0, y0);
    x0 = std::max(0, x0);
    y1 = std::min(h, y1);
    x1 = std::min(w, x1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) labels.at(y, x) = label;
    }
  }
};

void paint_person(LabelGrid& labels, const Geometry& g, Hairstyle style,
                  int cx, int dy) {
  const int h = labels.height();
  const int w = labels.width();
  Painter p{labels, h, w};

  const int cy = g.head_cy + dy;

  // Legs (skin) under the pants, pants over their upper part.
  const int lx = cx - g.leg_gap - g.leg_halfw;
  const int rx = cx + g.leg_gap + g.leg_halfw;
  p.rect(g.torso_bottom + dy, g.legs_bottom + dy, lx - g.leg_halfw,
         lx + g.leg_halfw + 1, kLeftLeg);
  p.rect(g.torso_bottom + dy, g.legs_bottom + dy, rx - g.leg_halfw,
         rx + g.leg_halfw + 1, kRightLeg);
  p.rect(g.torso_bottom + dy, g.pants_bottom + dy, cx - g.torso_halfw + 1,
         cx + g.torso_halfw, kPants);

  // Torso and arms.
  p.rect(g.torso_top + dy, g.torso_bottom + dy, cx - g.torso_halfw,
         cx + g.torso_halfw + 1, kUpperClothes);
  p.rect(g.torso_top + dy, g.arm_bottom + dy,
         cx - g.torso_halfw - g.arm_w, cx - g.torso_halfw, kLeftArm);
  p.rect(g.torso_top + dy, g.arm_bottom + dy, cx + g.torso_halfw + 1,
         cx + g.torso_halfw + 1 + g.arm_w, kRightArm);

  // Hair: annulus around the face, clipped by style; long adds side falls.
  const int r = g.head_r;
  const int outer = r + g.hair_th;
  int y_cut;
  switch (style) {
    case Hairstyle::kShort: y_cut = cy; break;
    case Hairstyle::kMedium: y_cut = cy + r; break;
    default: y_cut = cy + r; break;  // long starts from the medium annulus
  }
  for (int y = std::max(0, cy - outer); y < std::min(h, y_cut + 1); ++y) {
    for (int x = std::max(0, cx - outer); x <= std::min(w - 1, cx + outer);
         ++x) {
      const int ddy = y - cy;
      const int ddx = x - cx;
      const int d2 = ddy * ddy + ddx * ddx;
      if (d2 > r * r && d2 <= outer * outer) labels.at(y, x) = kHair;
    }
  }
  if (style == Hairstyle::kLong) {
    const int fall_bottom = std::min(cy + 3 * r, g.torso_top + dy +
                                                     (g.torso_bottom -
                                                      g.torso_top) / 3);
    p.rect(cy, fall_bottom, cx - outer, cx - r + 1, kHair);
    p.rect(cy, fall_bottom, cx + r, cx + outer + 1, kHair);
  }

  // Face last so it wins over hair inside the disc.
  for (int y = std::max(0, cy - r); y <= std::min(h - 1, cy + r); ++y) {
    for (int x = std::max(0, cx - r); x <= std::min(w - 1, cx + r); ++x) {
      const int ddy = y - cy;
      const int ddx = x - cx;
      if (ddy * ddy + ddx * ddx <= r * r) labels.at(y, x) = kFace;
    }
  }
}

Rgb color_of(uint8_t label, int y, int x, const IdentityFactors& idf,
             const ClothesFactors& cf, Hairstyle style) {
  switch (label) {
    case kFace: return idf.face_color;
    case kLeftArm:
    case kRightArm: return scale(idf.face_color, 0.92f);
    case kLeftLeg:
    case kRightLeg: return scale(idf.face_color, 0.85f);
    case kHair:
      return hair_style_palette()[static_cast<size_t>(style_index(style))];
    case kUpperClothes: {
      const int t = (cf.vertical ? x : y) / cf.period;
      return (t % 2 == 0) ? cf.upper_a : cf.upper_b;
    }
    case kPants: {
      const int t = (cf.vertical ? x : y) / cf.period;
      return (t % 2 == 0) ? cf.lower_a : cf.lower_b;
    }
    default: return {0.12f, 0.13f, 0.15f};
  }
}

}  // namespace

void SyntheticConfig::validate() const {
  if (num_identities < 1 || clothes_per_identity < 1 ||
      hairstyles_per_identity < 1 || images_per_combination < 1) {
    throw ConfigError("synthetic config: all counts must be >= 1");
  }
  if (hairstyles_per_identity > 3) {
    throw ConfigError(
        "synthetic config: at most 3 hairstyles per identity (short, medium, "
        "long)");
  }
  if (noise_std < 0) {
    throw ConfigError("synthetic config: noise_std must be >= 0");
  }
  if (image_height <= 0 || image_width <= 0) {
    throw ConfigError("synthetic config: image size must be positive");
  }
  check_fits(*this);
}

Rgb synthetic_identity_color(uint64_t seed, int identity) {
  return identity_factors(seed, identity).face_color;
}

Hairstyle canonical_hairstyle(int identity, int num_styles) {
  if (num_styles < 1) throw ArgumentError("num_styles must be >= 1");
  return style_from_index(identity % std::min(num_styles, 3));
}

Dataset generate_synthetic_dataset(const SyntheticConfig& config) {
  config.validate();
  RngStream root(config.seed);

  Dataset ds;
  const int h = config.image_height;
  const int w = config.image_width;
  size_t linear = 0;

  for (int identity = 0; identity < config.num_identities; ++identity) {
    const IdentityFactors idf = identity_factors(config.seed, identity);
    const Geometry geom = layout(config, idf);

    for (int cl = 0; cl < config.clothes_per_identity; ++cl) {
      const int clothes_class = identity * config.clothes_per_identity + cl;
      const ClothesFactors cf = clothes_factors(config.seed, clothes_class);

      for (int hi = 0; hi < config.hairstyles_per_identity; ++hi) {
        const Hairstyle style = style_from_index(hi);

        for (int img = 0; img < config.images_per_combination;
             ++img, ++linear) {
          // Jitter is keyed by (clothes slot, hairstyle, image index) only,
          // so identity is the sole source of difference between matching
          // samples of two identities.
          RngStream jit = root.derive("image", cl, hi, img);
          const int dx = static_cast<int>(jit.uniform_int(2 * kJitterPx + 1)) -
                         kJitterPx;
          const int dy = static_cast<int>(jit.uniform_int(2 * kJitterPx + 1)) -
                         kJitterPx;
          const float brightness =
              static_cast<float>(jit.uniform_in(0.9, 1.1));

          LabelGrid labels(h, w, kBackground);
          paint_person(labels, geom, style, w / 2 + dx, dy);

          Image image(h, w);
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              Rgb c = color_of(labels.at(y, x), y, x, idf, cf, style);
              image.set_pixel(y, x, scale(c, brightness));
            }
          }
          if (config.noise_std > 0) {
            float* p = image.data();
            const size_t n = 3 * image.pixels();
            for (size_t i = 0; i < n; ++i) {
              p[i] += static_cast<float>(jit.normal(0.0, config.noise_std));
            }
          }
          image.quantize_to_8bit();

          Sample s;
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%06zu", linear);
          s.id = buf;
          s.image = std::move(image);
          s.identity = identity;
          s.clothes = clothes_class;
          s.camera = img % 2;
          s.hairstyle = style;
          s.semantic_map = SemanticMap{labels};
          s.view = SampleView::kRaw;
          ds.add(std::move(s));
        }
      }
    }
  }
  return ds;
}

FactoredSplit factored_split(const Dataset& dataset,
                             const FactoredSplitSpec& spec) {
  if (spec.train_images_per_combo < 0) {
    throw ConfigError("factored split: train_images_per_combo must be >= 0");
  }

  // Rank of each sample within its (identity, clothes, hairstyle) group, in
  // insertion order; also each identity's clothes classes ranked.
  std::map<std::tuple<int, int, int>, int> group_count;
  const auto clothes_map = dataset.clothes_by_identity();

  int num_styles = 0;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset[i];
    if (s.hairstyle != Hairstyle::kOriginal) {
      num_styles = std::max(num_styles, style_index(s.hairstyle) + 1);
    }
  }

  FactoredSplit split;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset[i];
    const int style_key =
        s.hairstyle == Hairstyle::kOriginal ? -1 : style_index(s.hairstyle);
    int& rank = group_count[{s.identity, s.clothes, style_key}];
    const int my_rank = rank++;

    if (my_rank >= spec.train_images_per_combo) {
      split.test.push_back(i);
      continue;
    }

    bool in_train = true;
    if (spec.train_single_hairstyle && num_styles > 0 &&
        s.hairstyle != Hairstyle::kOriginal &&
        s.hairstyle != canonical_hairstyle(s.identity, num_styles)) {
      in_train = false;
    }
    if (spec.train_clothes_per_identity >= 0) {
      const auto& classes = clothes_map.at(s.identity);
      const auto pos = std::find(classes.begin(), classes.end(), s.clothes);
      const int clothes_rank = static_cast<int>(pos - classes.begin());
      if (clothes_rank >= spec.train_clothes_per_identity) in_train = false;
    }
    if (in_train) split.train.push_back(i);
    // Early images of non-train combinations are left out entirely so the
    // test pool stays balanced across factors.
  }
  return split;
}

}  // namespace msp
