#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "msp/core/error.hpp"
#include "msp/core/png_io.hpp"
#include "msp/core/rng.hpp"
#include "msp/hsoa/augment.hpp"
#include "msp/hsoa/hair_synthesizer.hpp"
#include "msp/masks/label_schema.hpp"

using namespace msp;

namespace {

/// Builds a small portrait: hair block on top, face below it, clothes
/// underneath, background elsewhere.
struct Portrait {
  Sample sample;
  RegionMasks masks;
  LabelSchema schema;
};

Portrait make_portrait(const std::string& id) {
  Portrait p;
  p.schema = default_label_schema();
  const int h = 16;
  const int w = 10;
  const uint8_t hair = static_cast<uint8_t>(p.schema.id_of("hair"));
  const uint8_t face = static_cast<uint8_t>(p.schema.id_of("face"));
  const uint8_t cloth = static_cast<uint8_t>(*p.schema.cloth_set.begin());

  SemanticMap map;
  map.labels = LabelGrid(h, w, 0);
  Image img(h, w, {0.9f, 0.9f, 0.9f});
  RngStream rng(hash_str(id));
  for (int y = 0; y < h; ++y) {
    for (int x = 2; x < w - 2; ++x) {
      uint8_t label = 0;
      if (y < 4) {
        label = hair;
      } else if (y < 7) {
        label = face;
      } else if (y < 14) {
        label = cloth;
      }
      if (label != 0) {
        map.labels.at(y, x) = label;
        img.set_pixel(y, x,
                      {static_cast<float>(rng.uniform()),
                       static_cast<float>(rng.uniform()),
                       static_cast<float>(rng.uniform())});
      }
    }
  }
  img.quantize_to_8bit();

  p.sample.id = id;
  p.sample.image = img;
  p.sample.identity = 3;
  p.sample.clothes = 5;
  p.sample.camera = 1;
  p.sample.hairstyle = Hairstyle::kShort;
  p.sample.semantic_map = map;
  p.masks = derive_masks(map, p.schema);
  return p;
}

}  // namespace

TEST_CASE("extract_head keeps head pixels and zeroes the rest") {
  Portrait p = make_portrait("head-a");
  Image head = extract_head(p.sample.image, p.masks);
  REQUIRE(head.same_shape(p.sample.image));
  for (int y = 0; y < head.height(); ++y) {
    for (int x = 0; x < head.width(); ++x) {
      if (p.masks.head.at(y, x)) {
        CHECK(head.pixel(y, x) == p.sample.image.pixel(y, x));
      } else {
        CHECK(head.pixel(y, x) == Rgb{0.f, 0.f, 0.f});
      }
    }
  }
}

TEST_CASE("stub synthesizer leaves face pixels exactly unchanged") {
  Portrait p = make_portrait("face-exact");
  Image head = extract_head(p.sample.image, p.masks);
  ProceduralStubSynthesizer stub;
  for (Hairstyle style :
       {Hairstyle::kShort, Hairstyle::kMedium, Hairstyle::kLong}) {
    SynthesizedHead out = stub.synthesize(head, p.masks, style, p.sample.id);
    REQUIRE(out.image.same_shape(head));
    CHECK(out.style == style);
    CHECK(out.source_sample_id == p.sample.id);
    for (int y = 0; y < head.height(); ++y) {
      for (int x = 0; x < head.width(); ++x) {
        if (p.masks.face.at(y, x)) {
          CHECK(out.image.pixel(y, x) == head.pixel(y, x));
        }
        if (!p.masks.head.at(y, x)) {
          CHECK(out.image.pixel(y, x) == Rgb{0.f, 0.f, 0.f});
        }
      }
    }
  }
}

TEST_CASE("stub output is deterministic in (sample_id, style)") {
  Portrait p = make_portrait("stub-det");
  Image head = extract_head(p.sample.image, p.masks);
  ProceduralStubSynthesizer stub;
  SynthesizedHead a =
      stub.synthesize(head, p.masks, Hairstyle::kLong, p.sample.id);
  SynthesizedHead b =
      stub.synthesize(head, p.masks, Hairstyle::kLong, p.sample.id);
  CHECK(a.image == b.image);
  SynthesizedHead c =
      stub.synthesize(head, p.masks, Hairstyle::kLong, "another-id");
  CHECK_FALSE(a.image == c.image);
}

TEST_CASE("longer styles cover at least as much of the hair region") {
  Portrait p = make_portrait("coverage");
  Image head = extract_head(p.sample.image, p.masks);
  ProceduralStubSynthesizer stub;
  int covered_prev = -1;
  for (Hairstyle style :
       {Hairstyle::kShort, Hairstyle::kMedium, Hairstyle::kLong}) {
    SynthesizedHead out = stub.synthesize(head, p.masks, style, p.sample.id);
    int covered = 0;
    for (int y = 0; y < head.height(); ++y) {
      for (int x = 0; x < head.width(); ++x) {
        if (!p.masks.hair.at(y, x)) continue;
        // Hair pixels are either a shade of the style color or the neutral
        // vacated tone; the style colors all sit far from that grey.
        Rgb v = out.image.pixel(y, x);
        const float dist = std::max({std::abs(v[0] - 0.72f),
                                     std::abs(v[1] - 0.72f),
                                     std::abs(v[2] - 0.74f)});
        if (dist > 0.1f) ++covered;
      }
    }
    CHECK(covered > 0);
    CHECK(covered >= covered_prev);
    covered_prev = covered;
  }
}

TEST_CASE("composite_hair only rewrites pixels under the hair mask") {
  Portrait p = make_portrait("composite");
  Image head = extract_head(p.sample.image, p.masks);
  ProceduralStubSynthesizer stub;
  SynthesizedHead synth =
      stub.synthesize(head, p.masks, Hairstyle::kMedium, p.sample.id);
  Image out = composite_hair(p.sample.image, p.masks.hair, synth);
  REQUIRE(out.same_shape(p.sample.image));
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (p.masks.hair.at(y, x)) {
        CHECK(out.pixel(y, x) == synth.image.pixel(y, x));
      } else {
        CHECK(out.pixel(y, x) == p.sample.image.pixel(y, x));
      }
    }
  }
}

TEST_CASE("augment_identity labels outputs correctly") {
  Portrait p = make_portrait("labels");
  ProceduralStubSynthesizer stub;
  AugmentResult result = augment_identity(
      p.sample, p.masks, stub, {Hairstyle::kMedium, Hairstyle::kLong});
  REQUIRE(result.samples.size() == 2);
  CHECK(result.skipped_styles.empty());
  CHECK_FALSE(result.empty_hair_mask);
  for (size_t i = 0; i < result.samples.size(); ++i) {
    const Sample& s = result.samples[i];
    CHECK(s.identity == p.sample.identity);
    CHECK(s.clothes == p.sample.clothes);
    CHECK(s.camera == p.sample.camera);
    CHECK(s.view == SampleView::kHsoaAug);
    CHECK(s.id != p.sample.id);
    REQUIRE(s.semantic_map.has_value());
    CHECK(s.semantic_map->labels == p.sample.semantic_map->labels);
  }
  CHECK(result.samples[0].hairstyle == Hairstyle::kMedium);
  CHECK(result.samples[1].hairstyle == Hairstyle::kLong);
}

TEST_CASE("augmented images differ from the source only under hair") {
  Portrait p = make_portrait("diff-under-hair");
  ProceduralStubSynthesizer stub;
  AugmentResult result =
      augment_identity(p.sample, p.masks, stub, {Hairstyle::kLong});
  REQUIRE(result.samples.size() == 1);
  const Image& out = result.samples[0].image;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!p.masks.hair.at(y, x)) {
        CHECK(out.pixel(y, x) == p.sample.image.pixel(y, x));
      }
    }
  }
}

TEST_CASE("requesting the original style is an error") {
  Portrait p = make_portrait("original-style");
  ProceduralStubSynthesizer stub;
  CHECK_THROWS_AS(
      augment_identity(p.sample, p.masks, stub, {Hairstyle::kOriginal}),
      ArgumentError);
}

TEST_CASE("empty hair mask is flagged, not fatal") {
  Portrait p = make_portrait("no-hair");
  // Relabel all hair pixels as background.
  for (int y = 0; y < p.sample.semantic_map->height(); ++y) {
    for (int x = 0; x < p.sample.semantic_map->width(); ++x) {
      if (p.masks.hair.at(y, x)) p.sample.semantic_map->labels.at(y, x) = 0;
    }
  }
  p.masks = derive_masks(*p.sample.semantic_map, p.schema);
  ProceduralStubSynthesizer stub;
  AugmentResult result =
      augment_identity(p.sample, p.masks, stub, {Hairstyle::kShort});
  CHECK(result.empty_hair_mask);
  REQUIRE(result.samples.size() == 1);
  // Nothing to rewrite: the composite equals the source image.
  CHECK(result.samples[0].image == p.sample.image);
}

TEST_CASE("file adapter loads rendered heads and reports missing ones") {
  Portrait p = make_portrait("file-adapter");
  Image head = extract_head(p.sample.image, p.masks);
  ProceduralStubSynthesizer stub;
  SynthesizedHead rendered =
      stub.synthesize(head, p.masks, Hairstyle::kShort, p.sample.id);

  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "msp_test_heads";
  fs::create_directories(root / p.sample.id);
  write_rgb_png((root / p.sample.id / "short.png").string(), rendered.image);

  FileAdapterSynthesizer adapter(root.string());
  SynthesizedHead loaded =
      adapter.synthesize(head, p.masks, Hairstyle::kShort, p.sample.id);
  CHECK(loaded.image == rendered.image);

  CHECK_THROWS_AS(
      adapter.synthesize(head, p.masks, Hairstyle::kLong, p.sample.id),
      DataError);
  fs::remove_all(root);
}

TEST_CASE("augment_identity reports styles the synthesizer failed on") {
  Portrait p = make_portrait("skip-style");
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "msp_test_heads_skip";
  fs::create_directories(root);
  FileAdapterSynthesizer adapter(root.string());  // no files at all
  AugmentResult result = augment_identity(
      p.sample, p.masks, adapter, {Hairstyle::kShort, Hairstyle::kMedium});
  CHECK(result.samples.empty());
  REQUIRE(result.skipped_styles.size() == 2);
  CHECK(result.skipped_styles[0] == Hairstyle::kShort);
  CHECK(result.skipped_styles[1] == Hairstyle::kMedium);
  fs::remove_all(root);
}
