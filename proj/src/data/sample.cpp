#include "msp/data/sample.hpp"

#include <algorithm>

#include "msp/core/error.hpp"

namespace msp {

void Sample::validate() const {
  if (identity < 0 || clothes < 0 || camera < 0) {
    throw DataError("sample '" + id + "': labels must be non-negative");
  }
  if (semantic_map &&
      (semantic_map->height() != image.height() ||
       semantic_map->width() != image.width())) {
    throw DataError("sample '" + id + "': semantic map " +
                    std::to_string(semantic_map->height()) + "x" +
                    std::to_string(semantic_map->width()) +
                    " does not match image " + std::to_string(image.height()) +
                    "x" + std::to_string(image.width()));
  }
}

void Dataset::add(Sample sample) {
  sample.validate();
  by_identity_[sample.identity].push_back(samples_.size());
  samples_.push_back(std::move(sample));
}

std::vector<int> Dataset::identities() const {
  std::vector<int> ids;
  ids.reserve(by_identity_.size());
  for (const auto& [id, idx] : by_identity_) ids.push_back(id);
  return ids;  // map iteration is already sorted
}

const std::vector<size_t>& Dataset::indices_of(int identity) const {
  auto it = by_identity_.find(identity);
  if (it == by_identity_.end()) {
    throw ArgumentError("dataset has no identity " + std::to_string(identity));
  }
  return it->second;
}

std::map<int, std::vector<int>> Dataset::clothes_by_identity() const {
  std::map<int, std::vector<int>> out;
  for (const auto& s : samples_) {
    auto& v = out[s.identity];
    if (std::find(v.begin(), v.end(), s.clothes) == v.end()) {
      v.push_back(s.clothes);
    }
  }
  for (auto& [id, v] : out) std::sort(v.begin(), v.end());
  return out;
}

int Dataset::num_clothes_classes() const {
  int n = 0;
  for (const auto& s : samples_) n = std::max(n, s.clothes + 1);
  return n;
}

}  // namespace msp
