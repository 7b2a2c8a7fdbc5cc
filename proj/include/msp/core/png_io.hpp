#ifndef MSP_CORE_PNG_IO_HPP_
#define MSP_CORE_PNG_IO_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msp/core/grid.hpp"
#include "msp/core/image.hpp"

namespace msp {

/// Reads any 8/16-bit PNG as RGB in [0,1] (palette expanded, gray
/// promoted, alpha stripped).
Image read_rgb_png(const std::string& path);

/// Writes an image as 8-bit RGB PNG; channel values are clamped to [0,1]
/// and rounded to the nearest 1/255.
void write_rgb_png(const std::string& path, const Image& image);

/// Reads a palette-indexed (or 8-bit gray) PNG as a raw label grid: pixel
/// values are the palette indices / gray levels, untouched. RGB input is
/// rejected since label identity would be lost.
LabelGrid read_label_png(const std::string& path);

/// Writes a label grid as a palette-indexed PNG. The palette maps each
/// label id to a display color; labels beyond the palette reuse it
/// cyclically.
void write_label_png(const std::string& path, const LabelGrid& labels,
                     const std::vector<std::array<uint8_t, 3>>& palette);

/// Writes a single-channel grid as 8-bit grayscale, mapping [lo,hi] to
/// [0,255] (values outside are clamped).
void write_gray_png(const std::string& path, const Grid<float>& values,
                    float lo, float hi);

}  // namespace msp

#endif  // MSP_CORE_PNG_IO_HPP_
