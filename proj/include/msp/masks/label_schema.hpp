#ifndef MSP_MASKS_LABEL_SCHEMA_HPP_
#define MSP_MASKS_LABEL_SCHEMA_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

namespace msp {

/// Named mapping from semantic classes to label integers, plus the label
/// subsets each region mask is derived from. The face and hair subsets must
/// be disjoint so the two masks cannot overlap before any dilation.
struct LabelSchema {
  std::map<std::string, int> classes;  // class name -> label id

  std::set<int> face_set;
  std::set<int> hair_set;
  std::set<int> cloth_set;
  std::set<int> limbs_set;

  int num_classes() const {
    int n = 0;
    for (const auto& [name, id] : classes) n = std::max(n, id + 1);
    return n;
  }

  bool known(int label) const {
    for (const auto& [name, id] : classes) {
      if (id == label) return true;
    }
    return false;
  }

  int id_of(const std::string& name) const;

  /// Throws ConfigError if the face and hair subsets overlap or any subset
  /// references an unknown label.
  void validate() const;
};

/// The default schema follows the common 20-class human-parsing convention:
/// face = {face}; hair = {hair}; limbs = {left/right arm, left/right leg};
/// cloth = {upper-clothes, dress, coat, pants, skirt}.
LabelSchema default_label_schema();

}  // namespace msp

#endif  // MSP_MASKS_LABEL_SCHEMA_HPP_
