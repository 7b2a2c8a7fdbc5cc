#ifndef MSP_DATA_DATASET_IO_HPP_
#define MSP_DATA_DATASET_IO_HPP_

#include <array>
#include <string>
#include <vector>

#include "msp/data/sample.hpp"

namespace msp {

/// Display palette for label PNGs (one color per parsing class).
std::vector<std::array<uint8_t, 3>> default_label_palette();

/// Writes a dataset in the directory layout consumed by `load_dataset`:
///   <root>/images/<id>.png          8-bit RGB
///   <root>/masks/<id>.png           palette-indexed labels (when present)
///   <root>/manifest.jsonl           one record per sample:
///       {"file", "identity", "clothes", "hairstyle", "camera"}
/// Existing files are overwritten.
void write_dataset(const std::string& root, const Dataset& dataset);

/// Loads a dataset written by `write_dataset` (or by hand in the same
/// layout). Masks are picked up from masks/<id>.png when the file exists.
/// Validates that every referenced image exists and that each mask matches
/// its image dimensions.
Dataset load_dataset(const std::string& root);

}  // namespace msp

#endif  // MSP_DATA_DATASET_IO_HPP_
