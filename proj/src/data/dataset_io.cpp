#include "msp/data/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "msp/core/error.hpp"
#include "msp/core/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace msp {

std::vector<std::array<uint8_t, 3>> default_label_palette() {
  // Colors for the 20-class parsing convention, background first.
  return {{{0, 0, 0}},       {{128, 0, 0}},     {{255, 0, 0}},
          {{0, 85, 0}},      {{170, 0, 51}},    {{255, 85, 0}},
          {{0, 0, 85}},      {{0, 119, 221}},   {{85, 85, 0}},
          {{0, 85, 85}},     {{85, 51, 0}},     {{52, 86, 128}},
          {{0, 128, 0}},     {{0, 0, 255}},     {{51, 170, 221}},
          {{0, 255, 255}},   {{85, 255, 170}},  {{170, 255, 85}},
          {{255, 255, 0}},   {{255, 170, 0}}};
}

void write_dataset(const std::string& root, const Dataset& dataset) {
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "masks");

  const auto palette = default_label_palette();
  std::ofstream manifest(fs::path(root) / "manifest.jsonl");
  if (!manifest) {
    throw DataError("cannot write manifest under " + root);
  }

  for (size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset[i];
    const std::string image_rel = "images/" + s.id + ".png";
    write_rgb_png((fs::path(root) / image_rel).string(), s.image);
    if (s.semantic_map) {
      write_label_png((fs::path(root) / "masks" / (s.id + ".png")).string(),
                      s.semantic_map->labels, palette);
    }
    json rec = {{"file", image_rel},
                {"identity", s.identity},
                {"clothes", s.clothes},
                {"hairstyle", to_string(s.hairstyle)},
                {"camera", s.camera}};
    manifest << rec.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& root) {
  const fs::path manifest_path = fs::path(root) / "manifest.jsonl";
  std::ifstream manifest(manifest_path);
  if (!manifest) {
    throw FormatError("missing manifest: " + manifest_path.string());
  }

  Dataset ds;
  std::string line;
  size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        " is not valid JSON: " + e.what());
    }
    for (const char* key : {"file", "identity", "clothes", "hairstyle",
                            "camera"}) {
      if (!rec.contains(key)) {
        throw FormatError("manifest line " + std::to_string(line_no) +
                          " misses key '" + key + "'");
      }
    }

    Sample s;
    const std::string file = rec["file"].get<std::string>();
    const fs::path image_path = fs::path(root) / file;
    if (!fs::exists(image_path)) {
      throw DataError("manifest references missing image: " +
                      image_path.string());
    }
    s.image = read_rgb_png(image_path.string());
    s.id = fs::path(file).stem().string();
    s.identity = rec["identity"].get<int>();
    s.clothes = rec["clothes"].get<int>();
    s.camera = rec["camera"].get<int>();
    s.hairstyle = hairstyle_from_string(rec["hairstyle"].get<std::string>());

    const fs::path mask_path = fs::path(root) / "masks" / (s.id + ".png");
    if (fs::exists(mask_path)) {
      SemanticMap map{read_label_png(mask_path.string())};
      if (map.height() != s.image.height() ||
          map.width() != s.image.width()) {
        throw DataError("mask does not match image dimensions: " +
                        mask_path.string());
      }
      s.semantic_map = std::move(map);
    }
    ds.add(std::move(s));
  }
  return ds;
}

}  // namespace msp
