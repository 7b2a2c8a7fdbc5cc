#ifndef MSP_DATA_SAMPLE_HPP_
#define MSP_DATA_SAMPLE_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msp/core/image.hpp"
#include "msp/hsoa/hairstyle.hpp"
#include "msp/masks/region_masks.hpp"

namespace msp {

/// How a sample entered the training stream.
enum class SampleView { kRaw, kErased, kHsoaAug };

/// One dataset record: image, labels, and (optionally) its parsing map.
struct Sample {
  std::string id;
  Image image;
  int identity = 0;
  int clothes = 0;  // global clothes class id
  int camera = 0;
  Hairstyle hairstyle = Hairstyle::kOriginal;
  std::optional<SemanticMap> semantic_map;
  SampleView view = SampleView::kRaw;

  /// Throws on negative labels or a semantic map whose dims disagree with
  /// the image.
  void validate() const;
};

/// Immutable-after-load collection of samples with per-identity indexing.
class Dataset {
 public:
  void add(Sample sample);

  size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](size_t i) const { return samples_[i]; }
  Sample& at(size_t i) { return samples_[i]; }

  /// Sorted distinct identity labels.
  std::vector<int> identities() const;

  /// Indices of all samples with the given identity, in insertion order.
  const std::vector<size_t>& indices_of(int identity) const;

  /// identity -> sorted distinct clothes class ids of that identity.
  std::map<int, std::vector<int>> clothes_by_identity() const;

  /// Largest clothes class id + 1 (0 when empty).
  int num_clothes_classes() const;

 private:
  std::vector<Sample> samples_;
  std::map<int, std::vector<size_t>> by_identity_;
};

}  // namespace msp

#endif  // MSP_DATA_SAMPLE_HPP_
