#include "msp/core/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "msp/core/error.hpp"

namespace msp {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw FormatError(std::string("png: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                 png_warn_fn);
    if (!png) throw FormatError("png: failed to create read struct");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_read_struct(&png, nullptr, nullptr);
      throw FormatError("png: failed to create info struct");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                  png_warn_fn);
    if (!png) throw FormatError("png: failed to create write struct");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw FormatError("png: failed to create info struct");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw DataError("cannot open file: " + path);
  }
  return f;
}

}  // namespace

Image read_rgb_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  int color = png_get_color_type(r.png, r.info);
  int depth = png_get_bit_depth(r.png, r.info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  if (depth == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  Image img(static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, static_cast<int>(y), static_cast<int>(x)) =
            row[x * 3 + c] / 255.f;
      }
    }
  }
  png_read_end(r.png, nullptr);
  return img;
}

void write_rgb_png(const std::string& path, const Image& image) {
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, image.width(), image.height(), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);

  std::vector<uint8_t> row(static_cast<size_t>(image.width()) * 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = std::min(1.f, std::max(0.f, image.at(c, y, x)));
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<uint8_t>(std::lround(v * 255.f));
      }
    }
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);
}

LabelGrid read_label_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  int color = png_get_color_type(r.png, r.info);
  int depth = png_get_bit_depth(r.png, r.info);

  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) {
    throw FormatError("label png must be palette-indexed or grayscale: " +
                      path);
  }
  if (depth == 16) png_set_strip_16(r.png);
  if (depth < 8) png_set_packing(r.png);  // one byte per index
  png_read_update_info(r.png, r.info);

  LabelGrid grid(static_cast<int>(h), static_cast<int>(w));
  std::vector<uint8_t> row(w);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      grid.at(static_cast<int>(y), static_cast<int>(x)) = row[x];
    }
  }
  png_read_end(r.png, nullptr);
  return grid;
}

void write_label_png(const std::string& path, const LabelGrid& labels,
                     const std::vector<std::array<uint8_t, 3>>& palette) {
  if (palette.empty()) throw ArgumentError("write_label_png: empty palette");
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, labels.width(), labels.height(), 8,
               PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

  std::vector<png_color> plte(256);
  for (size_t i = 0; i < plte.size(); ++i) {
    const auto& c = palette[i % palette.size()];
    plte[i] = {c[0], c[1], c[2]};
  }
  png_set_PLTE(w.png, w.info, plte.data(), static_cast<int>(plte.size()));
  png_write_info(w.png, w.info);

  for (int y = 0; y < labels.height(); ++y) {
    png_write_row(w.png, const_cast<png_bytep>(&labels.at(y, 0)));
  }
  png_write_end(w.png, nullptr);
}

void write_gray_png(const std::string& path, const Grid<float>& values,
                    float lo, float hi) {
  if (!(hi > lo)) throw ArgumentError("write_gray_png: hi must exceed lo");
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, values.width(), values.height(), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);

  std::vector<uint8_t> row(values.width());
  for (int y = 0; y < values.height(); ++y) {
    for (int x = 0; x < values.width(); ++x) {
      float t = (values.at(y, x) - lo) / (hi - lo);
      t = std::min(1.f, std::max(0.f, t));
      row[static_cast<size_t>(x)] =
          static_cast<uint8_t>(std::lround(t * 255.f));
    }
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);
}

}  // namespace msp
