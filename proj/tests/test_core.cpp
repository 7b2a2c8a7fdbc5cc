#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "msp/core/error.hpp"
#include "msp/core/grid.hpp"
#include "msp/core/image.hpp"
#include "msp/core/png_io.hpp"
#include "msp/core/rng.hpp"

using namespace msp;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("hash_str matches published FNV-1a vectors") {
  CHECK(hash_str("") == 0xCBF29CE484222325ULL);
  CHECK(hash_str("a") == 0xAF63DC4C8601EC8CULL);
  CHECK(hash_str("foobar") == 0x85944171F73967E8ULL);
}

TEST_CASE("rng streams are deterministic and key-dependent") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42);
  RngStream d(43);
  int differ = 0;
  for (int i = 0; i < 100; ++i) differ += c.next_u64() != d.next_u64();
  CHECK(differ > 90);
}

TEST_CASE("derived streams depend on tag and indices, not call order") {
  RngStream root(7);
  CHECK(root.derive("alpha").key() == root.derive("alpha").key());
  CHECK(root.derive("alpha").key() != root.derive("beta").key());
  CHECK(root.derive("alpha", 0).key() != root.derive("alpha", 1).key());
  CHECK(root.derive("alpha", 2, 3).key() == root.derive("alpha", 2, 3).key());

  // Drawing from one derived stream does not disturb a sibling.
  RngStream left = root.derive("left");
  RngStream right_before = root.derive("right");
  uint64_t first = right_before.next_u64();
  left.next_u64();
  left.next_u64();
  RngStream right_after = root.derive("right");
  CHECK(right_after.next_u64() == first);
}

TEST_CASE("uniform stays in [0,1) with a sane mean") {
  RngStream rng(3);
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform_int covers its range and nothing else") {
  RngStream rng(11);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    uint64_t v = rng.uniform_int(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("bernoulli edge probabilities are exact") {
  RngStream rng(5);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(rng.bernoulli(0.0));
  for (int i = 0; i < 1000; ++i) CHECK(rng.bernoulli(1.0));
}

TEST_CASE("normal has approximately the requested moments") {
  RngStream rng(9);
  const int n = 20000;
  double sum = 0;
  double sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal(2.0, 3.0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
  CHECK(var == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("shuffle permutes without loss and is seed-stable") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<size_t>(i)] = i;
  std::vector<int> w = v;
  RngStream(123).shuffle(v);
  RngStream(123).shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  for (int i = 0; i < 50; ++i) expect[static_cast<size_t>(i)] = i;
  CHECK(sorted == expect);
  CHECK(v != expect);  // astronomically unlikely to be identity
}

TEST_CASE("grid basics") {
  Grid<int> g(3, 4, 7);
  CHECK(g.height() == 3);
  CHECK(g.width() == 4);
  CHECK(g.at(2, 3) == 7);
  g.at(1, 2) = -1;
  CHECK(g.at(1, 2) == -1);
  Grid<int> h(3, 4, 7);
  CHECK(g.same_shape(h));
  CHECK_FALSE(g == h);
  h.at(1, 2) = -1;
  CHECK(g == h);
  CHECK_THROWS_AS(Grid<int>(0, 4), ArgumentError);
  CHECK_THROWS_AS(Grid<int>(4, -1), ArgumentError);
}

TEST_CASE("image pixel accessors agree with planar storage") {
  Image img(2, 3, {0.25f, 0.5f, 0.75f});
  CHECK(img.pixel(1, 2) == Rgb{0.25f, 0.5f, 0.75f});
  img.set_pixel(0, 1, {1.f, 0.f, 0.5f});
  CHECK(img.at(0, 0, 1) == 1.f);
  CHECK(img.at(1, 0, 1) == 0.f);
  CHECK(img.at(2, 0, 1) == 0.5f);
  CHECK_THROWS_AS(Image(0, 1), ArgumentError);
}

TEST_CASE("quantize_to_8bit is idempotent and snaps to the 1/255 lattice") {
  RngStream rng(21);
  Image img(8, 6);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 6; ++x) {
        img.at(c, y, x) = static_cast<float>(rng.uniform_in(-0.2, 1.2));
      }
    }
  }
  img.quantize_to_8bit();
  Image once = img;
  img.quantize_to_8bit();
  CHECK(img == once);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 6; ++x) {
        float v = img.at(c, y, x);
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
        float steps = v * 255.f;
        CHECK(std::abs(steps - std::round(steps)) < 1e-4f);
      }
    }
  }
}

TEST_CASE("rgb png round-trip is lossless for quantized images") {
  RngStream rng(31);
  Image img(13, 9);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 13; ++y) {
      for (int x = 0; x < 9; ++x) {
        img.at(c, y, x) = static_cast<float>(rng.uniform());
      }
    }
  }
  img.quantize_to_8bit();
  const std::string path = temp_path("msp_test_rt.png");
  write_rgb_png(path, img);
  Image back = read_rgb_png(path);
  CHECK(back == img);
  std::remove(path.c_str());
}

TEST_CASE("label png round-trip preserves raw label ids") {
  RngStream rng(41);
  LabelGrid labels(10, 7);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 7; ++x) {
      labels.at(y, x) = static_cast<uint8_t>(rng.uniform_int(20));
    }
  }
  std::vector<std::array<uint8_t, 3>> palette;
  for (int i = 0; i < 20; ++i) {
    palette.push_back({static_cast<uint8_t>(i * 12),
                       static_cast<uint8_t>(255 - i * 9),
                       static_cast<uint8_t>(i * 3)});
  }
  const std::string path = temp_path("msp_test_labels.png");
  write_label_png(path, labels, palette);
  LabelGrid back = read_label_png(path);
  CHECK(back == labels);
  std::remove(path.c_str());
}

TEST_CASE("reading a missing png fails loudly") {
  CHECK_THROWS_AS(read_rgb_png(temp_path("msp_does_not_exist.png")), Error);
  CHECK_THROWS_AS(read_label_png(temp_path("msp_does_not_exist.png")), Error);
}
