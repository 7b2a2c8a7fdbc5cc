#include "msp/masks/label_schema.hpp"

#include "msp/core/error.hpp"

namespace msp {

int LabelSchema::id_of(const std::string& name) const {
  auto it = classes.find(name);
  if (it == classes.end()) {
    throw SchemaError("label schema has no class named '" + name + "'");
  }
  return it->second;
}

void LabelSchema::validate() const {
  auto check_known = [this](const std::set<int>& s, const char* which) {
    for (int id : s) {
      if (!known(id)) {
        throw ConfigError(std::string("label subset '") + which +
                          "' references unknown label " + std::to_string(id));
      }
    }
  };
  check_known(face_set, "face");
  check_known(hair_set, "hair");
  check_known(cloth_set, "cloth");
  check_known(limbs_set, "limbs");

  for (int id : face_set) {
    if (hair_set.count(id)) {
      throw ConfigError("face and hair label sets overlap at label " +
                        std::to_string(id));
    }
  }
}

LabelSchema default_label_schema() {
  LabelSchema s;
  const char* names[] = {"background", "hat",        "hair",
                         "glove",      "sunglasses", "upper-clothes",
                         "dress",      "coat",       "socks",
                         "pants",      "jumpsuit",   "scarf",
                         "skirt",      "face",       "left-arm",
                         "right-arm",  "left-leg",   "right-leg",
                         "left-shoe",  "right-shoe"};
  for (int i = 0; i < 20; ++i) s.classes[names[i]] = i;

  s.face_set = {s.classes["face"]};
  s.hair_set = {s.classes["hair"]};
  s.cloth_set = {s.classes["upper-clothes"], s.classes["dress"],
                 s.classes["coat"], s.classes["pants"], s.classes["skirt"]};
  s.limbs_set = {s.classes["left-arm"], s.classes["right-arm"],
                 s.classes["left-leg"], s.classes["right-leg"]};
  s.validate();
  return s;
}

}  // namespace msp
