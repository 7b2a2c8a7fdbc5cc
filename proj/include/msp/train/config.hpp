#ifndef MSP_TRAIN_CONFIG_HPP_
#define MSP_TRAIN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "msp/cpre/cpre.hpp"
#include "msp/data/synthetic.hpp"
#include "msp/hsoa/hairstyle.hpp"
#include "msp/losses/losses.hpp"
#include "msp/model/model.hpp"

namespace msp {

enum class DatasetType { kSynthetic, kDirectory };

std::string to_string(DatasetType type);
DatasetType dataset_type_from_string(const std::string& name);

struct DatasetSection {
  DatasetType type = DatasetType::kSynthetic;
  std::string path;  // root of a written dataset (directory type)
  SyntheticConfig synthetic;
  FactoredSplitSpec split;
};

struct LossSection {
  LossWeights weights;
  double margin = 0.3;
};

struct HsoaSection {
  bool enabled = true;
  std::vector<Hairstyle> styles = {Hairstyle::kShort, Hairstyle::kMedium,
                                   Hairstyle::kLong};
  std::string synthesizer = "stub";  // "stub" or "file"
  std::string file_root;             // pre-rendered heads ("file" synthesizer)
};

struct OptimizerSection {
  std::string type = "adam";
  double lr = 3.5e-4;
  double weight_decay = 5e-4;
};

struct ScheduleSection {
  int epochs = 60;
  std::vector<int> decay_epochs = {20, 40};  // lr *= decay_factor at each
  double decay_factor = 0.1;
  int eval_every = 5;  // epochs between test-set evaluations
};

struct SamplerSection {
  int p = 4;   // identities per batch
  int k = 16;  // samples per identity
};

/// Everything one run needs, serializable to/from a single JSON document.
struct RunConfig {
  uint64_t seed = 0;
  DatasetSection dataset;
  ModelConfig model;  // identity/clothes class counts are filled from data
  LossSection loss;
  CpreConfig cpre;
  HsoaSection hsoa;
  OptimizerSection optimizer;
  ScheduleSection schedule;
  SamplerSection sampler;

  void validate() const;
};

/// Strict parse: any key not in the schema raises ConfigError naming it;
/// missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

/// Canonical serialization (keys sorted, defaults materialized). Derived
/// fields such as class counts are not included.
nlohmann::json config_to_json(const RunConfig& config);

/// Applies one "dotted.path=value" assignment to a config document. The path
/// must already exist (overrides cannot invent keys); the value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Stable digest of the canonical serialization; checkpoints embed it so a
/// resume against a different configuration is caught.
uint64_t config_hash(const RunConfig& config);

}  // namespace msp

#endif  // MSP_TRAIN_CONFIG_HPP_
