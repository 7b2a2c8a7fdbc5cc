#include "msp/train/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"

namespace msp {

using nlohmann::json;

std::string to_string(DatasetType type) {
  switch (type) {
    case DatasetType::kSynthetic: return "synthetic";
    case DatasetType::kDirectory: return "directory";
  }
  throw ArgumentError("unknown dataset type");
}

DatasetType dataset_type_from_string(const std::string& name) {
  if (name == "synthetic") return DatasetType::kSynthetic;
  if (name == "directory") return DatasetType::kDirectory;
  throw ConfigError("unknown dataset type '" + name +
                    "' (expected synthetic or directory)");
}

namespace {

/// Rejects keys outside the schema so typos fail loudly instead of being
/// silently ignored.
void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + path + "' must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; })) {
      throw ConfigError("unknown config key '" + path + it.key() + "'");
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void read_rgb(const json& j, const char* key, Rgb& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(std::string("config key '") + key +
                      "' must be an array of 3 numbers");
  }
  for (int c = 0; c < 3; ++c) {
    out[static_cast<size_t>(c)] = v.at(static_cast<size_t>(c)).get<float>();
  }
}

void parse_dataset(const json& j, DatasetSection& out) {
  check_keys(j, "dataset.", {"type", "path", "synthetic", "split"});
  if (j.contains("type")) {
    out.type = dataset_type_from_string(j.at("type").get<std::string>());
  }
  read_if(j, "path", out.path);
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    check_keys(s, "dataset.synthetic.",
               {"num_identities", "clothes_per_identity",
                "hairstyles_per_identity", "images_per_combination",
                "image_height", "image_width", "noise_std", "seed"});
    read_if(s, "num_identities", out.synthetic.num_identities);
    read_if(s, "clothes_per_identity", out.synthetic.clothes_per_identity);
    read_if(s, "hairstyles_per_identity", out.synthetic.hairstyles_per_identity);
    read_if(s, "images_per_combination", out.synthetic.images_per_combination);
    read_if(s, "image_height", out.synthetic.image_height);
    read_if(s, "image_width", out.synthetic.image_width);
    read_if(s, "noise_std", out.synthetic.noise_std);
    read_if(s, "seed", out.synthetic.seed);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "dataset.split.",
               {"train_images_per_combo", "train_clothes_per_identity",
                "train_single_hairstyle"});
    read_if(s, "train_images_per_combo", out.split.train_images_per_combo);
    read_if(s, "train_clothes_per_identity",
            out.split.train_clothes_per_identity);
    read_if(s, "train_single_hairstyle", out.split.train_single_hairstyle);
  }
}

void parse_model(const json& j, ModelConfig& out) {
  check_keys(j, "model.",
             {"backbone", "input_height", "input_width", "embed_dim",
              "rpa_enabled"});
  if (j.contains("backbone")) {
    out.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  }
  read_if(j, "input_height", out.input_height);
  read_if(j, "input_width", out.input_width);
  read_if(j, "embed_dim", out.embed_dim);
  read_if(j, "rpa_enabled", out.rpa_enabled);
}

void parse_loss(const json& j, LossSection& out) {
  check_keys(j, "loss.",
             {"lambda_tri", "lambda_att", "lambda_cal", "lambda_neg",
              "epsilon", "margin"});
  read_if(j, "lambda_tri", out.weights.lambda_tri);
  read_if(j, "lambda_att", out.weights.lambda_att);
  read_if(j, "lambda_cal", out.weights.lambda_cal);
  read_if(j, "lambda_neg", out.weights.lambda_neg);
  read_if(j, "epsilon", out.weights.epsilon);
  read_if(j, "margin", out.margin);
}

void parse_cpre(const json& j, CpreConfig& out) {
  check_keys(j, "cpre.",
             {"enabled", "keep_min", "keep_max", "mode", "fill", "mix",
              "cloth_dilation_radius"});
  read_if(j, "enabled", out.enabled);
  read_if(j, "keep_min", out.keep_min);
  read_if(j, "keep_max", out.keep_max);
  if (j.contains("mode")) {
    out.mode = keep_mode_from_string(j.at("mode").get<std::string>());
  }
  read_rgb(j, "fill", out.fill);
  if (j.contains("mix")) {
    const json& m = j.at("mix");
    check_keys(m, "cpre.mix.", {"raw_fraction", "assignment"});
    read_if(m, "raw_fraction", out.mix.raw_fraction);
    if (m.contains("assignment")) {
      out.mix.assignment =
          mix_assignment_from_string(m.at("assignment").get<std::string>());
    }
  }
  read_if(j, "cloth_dilation_radius", out.cloth_dilation_radius);
}

void parse_hsoa(const json& j, HsoaSection& out) {
  check_keys(j, "hsoa.", {"enabled", "styles", "synthesizer", "file_root"});
  read_if(j, "enabled", out.enabled);
  if (j.contains("styles")) {
    out.styles.clear();
    for (const json& s : j.at("styles")) {
      out.styles.push_back(hairstyle_from_string(s.get<std::string>()));
    }
  }
  read_if(j, "synthesizer", out.synthesizer);
  read_if(j, "file_root", out.file_root);
}

void parse_optimizer(const json& j, OptimizerSection& out) {
  check_keys(j, "optimizer.", {"type", "lr", "weight_decay"});
  read_if(j, "type", out.type);
  read_if(j, "lr", out.lr);
  read_if(j, "weight_decay", out.weight_decay);
}

void parse_schedule(const json& j, ScheduleSection& out) {
  check_keys(j, "schedule.",
             {"epochs", "decay_epochs", "decay_factor", "eval_every"});
  read_if(j, "epochs", out.epochs);
  if (j.contains("decay_epochs")) {
    out.decay_epochs.clear();
    for (const json& e : j.at("decay_epochs")) {
      out.decay_epochs.push_back(e.get<int>());
    }
  }
  read_if(j, "decay_factor", out.decay_factor);
  read_if(j, "eval_every", out.eval_every);
}

void parse_sampler(const json& j, SamplerSection& out) {
  check_keys(j, "sampler.", {"p", "k"});
  read_if(j, "p", out.p);
  read_if(j, "k", out.k);
}

}  // namespace

RunConfig config_from_json(const json& j) {
  check_keys(j, "",
             {"seed", "dataset", "model", "loss", "cpre", "hsoa", "optimizer",
              "schedule", "sampler"});
  RunConfig c;
  read_if(j, "seed", c.seed);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("model")) parse_model(j.at("model"), c.model);
  if (j.contains("loss")) parse_loss(j.at("loss"), c.loss);
  if (j.contains("cpre")) parse_cpre(j.at("cpre"), c.cpre);
  if (j.contains("hsoa")) parse_hsoa(j.at("hsoa"), c.hsoa);
  if (j.contains("optimizer")) parse_optimizer(j.at("optimizer"), c.optimizer);
  if (j.contains("schedule")) parse_schedule(j.at("schedule"), c.schedule);
  if (j.contains("sampler")) parse_sampler(j.at("sampler"), c.sampler);
  c.validate();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      e.what());
  }
  return config_from_json(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["dataset"]["type"] = to_string(c.dataset.type);
  j["dataset"]["path"] = c.dataset.path;
  j["dataset"]["synthetic"] = {
      {"num_identities", c.dataset.synthetic.num_identities},
      {"clothes_per_identity", c.dataset.synthetic.clothes_per_identity},
      {"hairstyles_per_identity", c.dataset.synthetic.hairstyles_per_identity},
      {"images_per_combination", c.dataset.synthetic.images_per_combination},
      {"image_height", c.dataset.synthetic.image_height},
      {"image_width", c.dataset.synthetic.image_width},
      {"noise_std", c.dataset.synthetic.noise_std},
      {"seed", c.dataset.synthetic.seed}};
  j["dataset"]["split"] = {
      {"train_images_per_combo", c.dataset.split.train_images_per_combo},
      {"train_clothes_per_identity", c.dataset.split.train_clothes_per_identity},
      {"train_single_hairstyle", c.dataset.split.train_single_hairstyle}};
  j["model"] = {{"backbone", to_string(c.model.backbone)},
                {"input_height", c.model.input_height},
                {"input_width", c.model.input_width},
                {"embed_dim", c.model.embed_dim},
                {"rpa_enabled", c.model.rpa_enabled}};
  j["loss"] = {{"lambda_tri", c.loss.weights.lambda_tri},
               {"lambda_att", c.loss.weights.lambda_att},
               {"lambda_cal", c.loss.weights.lambda_cal},
               {"lambda_neg", c.loss.weights.lambda_neg},
               {"epsilon", c.loss.weights.epsilon},
               {"margin", c.loss.margin}};
  j["cpre"] = {{"enabled", c.cpre.enabled},
               {"keep_min", c.cpre.keep_min},
               {"keep_max", c.cpre.keep_max},
               {"mode", to_string(c.cpre.mode)},
               {"fill", {c.cpre.fill[0], c.cpre.fill[1], c.cpre.fill[2]}},
               {"mix",
                {{"raw_fraction", c.cpre.mix.raw_fraction},
                 {"assignment", to_string(c.cpre.mix.assignment)}}},
               {"cloth_dilation_radius", c.cpre.cloth_dilation_radius}};
  json styles = json::array();
  for (Hairstyle s : c.hsoa.styles) styles.push_back(to_string(s));
  j["hsoa"] = {{"enabled", c.hsoa.enabled},
               {"styles", styles},
               {"synthesizer", c.hsoa.synthesizer},
               {"file_root", c.hsoa.file_root}};
  j["optimizer"] = {{"type", c.optimizer.type},
                    {"lr", c.optimizer.lr},
                    {"weight_decay", c.optimizer.weight_decay}};
  j["schedule"] = {{"epochs", c.schedule.epochs},
                   {"decay_epochs", c.schedule.decay_epochs},
                   {"decay_factor", c.schedule.decay_factor},
                   {"eval_every", c.schedule.eval_every}};
  j["sampler"] = {{"p", c.sampler.p}, {"k", c.sampler.k}};
  return j;
}

void apply_override(json& j, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment +
                      "' must have the form path.to.key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw_value = assignment.substr(eq + 1);

  std::vector<std::string> segments;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    segments.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const std::string& s : segments) {
    if (s.empty()) throw ConfigError("override path '" + path + "' is malformed");
  }

  json* cur = &j;
  for (size_t i = 0; i + 1 < segments.size(); ++i) {
    if (!cur->is_object() || !cur->contains(segments[i])) {
      throw ConfigError("override path '" + path + "' does not exist");
    }
    cur = &cur->at(segments[i]);
  }
  if (!cur->is_object() || !cur->contains(segments.back())) {
    throw ConfigError("override path '" + path + "' does not exist");
  }

  json value = json::parse(raw_value, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw_value;  // keep as plain string
  cur->at(segments.back()) = value;
}

uint64_t config_hash(const RunConfig& config) {
  return hash_str(config_to_json(config).dump());
}

void RunConfig::validate() const {
  model.validate();
  loss.weights.validate();
  cpre.validate();
  if (loss.margin < 0) throw ConfigError("triplet margin must be non-negative");
  if (dataset.type == DatasetType::kDirectory && dataset.path.empty()) {
    throw ConfigError("dataset.path is required for directory datasets");
  }
  dataset.synthetic.validate();
  if (hsoa.enabled) {
    if (hsoa.styles.empty()) {
      throw ConfigError("hsoa.styles must not be empty when hsoa is enabled");
    }
    std::set<Hairstyle> seen;
    for (Hairstyle s : hsoa.styles) {
      if (s == Hairstyle::kOriginal) {
        throw ConfigError("hsoa.styles cannot include the original style");
      }
      if (!seen.insert(s).second) {
        throw ConfigError("hsoa.styles contains duplicates");
      }
    }
    if (hsoa.synthesizer != "stub" && hsoa.synthesizer != "file") {
      throw ConfigError("hsoa.synthesizer must be 'stub' or 'file'");
    }
    if (hsoa.synthesizer == "file" && hsoa.file_root.empty()) {
      throw ConfigError("hsoa.file_root is required for the file synthesizer");
    }
  }
  if (optimizer.type != "adam") {
    throw ConfigError("optimizer.type must be 'adam'");
  }
  if (!(optimizer.lr > 0)) throw ConfigError("optimizer.lr must be positive");
  if (optimizer.weight_decay < 0) {
    throw ConfigError("optimizer.weight_decay must be non-negative");
  }
  if (schedule.epochs <= 0) throw ConfigError("schedule.epochs must be positive");
  if (!(schedule.decay_factor > 0) || schedule.decay_factor > 1) {
    throw ConfigError("schedule.decay_factor must lie in (0,1]");
  }
  int prev = 0;
  for (int e : schedule.decay_epochs) {
    if (e <= prev) {
      throw ConfigError(
          "schedule.decay_epochs must be strictly increasing and positive");
    }
    prev = e;
  }
  if (schedule.eval_every <= 0) {
    throw ConfigError("schedule.eval_every must be positive");
  }
  if (sampler.p < 2 || sampler.k < 2) {
    throw ConfigError(
        "sampler.p and sampler.k must each be at least 2 so every batch "
        "contains positives and negatives");
  }
}

}  // namespace msp
