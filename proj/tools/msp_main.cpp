// Command-line front end: dataset synthesis, offline augmentation, training,
// evaluation and embedding probes, all driven by one JSON config plus
// dotted-path overrides.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msp/core/error.hpp"
#include "msp/core/png_io.hpp"
#include "msp/core/rng.hpp"
#include "msp/data/dataset_io.hpp"
#include "msp/data/synthetic.hpp"
#include "msp/model/checkpoint.hpp"
#include "msp/train/config.hpp"
#include "msp/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration");
  cmd->add_option("--set", args.overrides,
                  "Override a config value, e.g. --set model.embed_dim=256");
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--seed", args.seed, "Run seed (applied last)");
}

msp::RunConfig resolve_config(const CommonArgs& args) {
  msp::RunConfig base = args.config_path.empty()
                            ? msp::RunConfig{}
                            : msp::load_config_file(args.config_path);
  json doc = msp::config_to_json(base);
  for (const std::string& assignment : args.overrides) {
    msp::apply_override(doc, assignment);
  }
  msp::RunConfig final_config = msp::config_from_json(doc);
  if (args.seed.has_value()) final_config.seed = *args.seed;
  final_config.validate();
  return final_config;
}

json report_to_json(const msp::RetrievalReport& r) {
  return {{"protocol", msp::to_string(r.protocol.mode)},
          {"rank1", r.rank1},
          {"mAP", r.mAP},
          {"cmc", r.cmc},
          {"num_queries", r.num_queries}};
}

int run_synth(const CommonArgs& args) {
  msp::RunConfig config = resolve_config(args);
  msp::Dataset full = msp::generate_synthetic_dataset(config.dataset.synthetic);
  msp::FactoredSplit split = msp::factored_split(full, config.dataset.split);
  msp::Dataset train;
  msp::Dataset test;
  for (size_t i : split.train) train.add(full[i]);
  for (size_t i : split.test) test.add(full[i]);
  msp::write_dataset((fs::path(args.out) / "train").string(), train);
  msp::write_dataset((fs::path(args.out) / "test").string(), test);
  std::cout << json{{"out", args.out},
                    {"train_samples", train.size()},
                    {"test_samples", test.size()}}
                   .dump()
            << "\n";
  return 0;
}

int run_augment(const CommonArgs& args) {
  msp::RunConfig config = resolve_config(args);
  msp::Trainer trainer(config, args.out);
  const msp::Dataset& pool = trainer.train_data();
  size_t originals = 0;
  size_t augmented = 0;
  for (size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].view == msp::SampleView::kHsoaAug) {
      ++augmented;
    } else {
      ++originals;
    }
  }
  const std::string dest = (fs::path(args.out) / "augmented_train").string();
  msp::write_dataset(dest, pool);
  std::cout << json{{"out", dest},
                    {"originals", originals},
                    {"augmented", augmented}}
                   .dump()
            << "\n";
  return 0;
}

int run_train(const CommonArgs& args, bool resume) {
  msp::RunConfig config = resolve_config(args);
  msp::Trainer trainer(config, args.out);
  msp::TrainResult result = trainer.run(resume);
  json out = {{"out", args.out},
              {"summary", (fs::path(args.out) / "reports" / "summary.json")
                              .string()},
              {"aborted", result.aborted},
              {"epochs_completed", result.epochs_completed},
              {"standard_rank1", result.final_eval.standard.rank1},
              {"standard_map", result.final_eval.standard.mAP},
              {"cloth_changing_rank1", result.final_eval.cloth_changing.rank1},
              {"cloth_changing_map", result.final_eval.cloth_changing.mAP}};
  std::cout << out.dump() << "\n";
  return result.aborted ? 1 : 0;
}

int run_eval(const CommonArgs& args, const std::string& checkpoint,
             bool ignore_hash, bool dump_attention) {
  msp::RunConfig config = resolve_config(args);
  msp::Trainer trainer(config, args.out);
  if (!checkpoint.empty()) {
    msp::load_checkpoint(checkpoint, trainer.model(), nullptr,
                         ignore_hash ? 0 : msp::config_hash(config));
  }
  msp::EvalSnapshot snap = trainer.evaluate(0);

  fs::create_directories(fs::path(args.out) / "reports");
  json report = {{"standard", report_to_json(snap.standard)},
                 {"cloth_changing", report_to_json(snap.cloth_changing)},
                 {"attention_mass",
                  {{"hair", snap.mean_attention.hair},
                   {"positive", snap.mean_attention.positive},
                   {"num_samples", snap.attention_samples}}}};
  const std::string report_path =
      (fs::path(args.out) / "reports" / "eval.json").string();
  std::ofstream out(report_path);
  if (!out) throw msp::DataError("cannot write '" + report_path + "'");
  out << report.dump(2) << "\n";

  if (dump_attention) {
    const fs::path dump_dir = fs::path(args.out) / "dumps" / "attention";
    fs::create_directories(dump_dir);
    const msp::Dataset& test = trainer.test_data();
    const int stride = trainer.model().config().total_stride();
    const int batch = 32;
    for (size_t start = 0; start < test.size();
         start += static_cast<size_t>(batch)) {
      const size_t end = std::min(test.size(),
                                  start + static_cast<size_t>(batch));
      std::vector<const msp::Image*> images;
      for (size_t i = start; i < end; ++i) images.push_back(&test[i].image);
      msp::nn::Tape tape;
      msp::ModelOutputs outs = trainer.model().forward(
          tape, images, msp::ForwardMode::kEval, false);
      const msp::nn::Tensor& att = tape.val(outs.attention_map);
      for (size_t i = start; i < end; ++i) {
        const int row = static_cast<int>(i - start);
        float peak = 0.0f;
        for (int y = 0; y < att.dim(2); ++y) {
          for (int x = 0; x < att.dim(3); ++x) {
            peak = std::max(peak,
                            static_cast<float>(att.at4(row, 0, y, x)));
          }
        }
        // Nearest-neighbor upscale back to input resolution for viewing.
        msp::Grid<float> up(att.dim(2) * stride, att.dim(3) * stride, 0.0f);
        for (int y = 0; y < up.height(); ++y) {
          for (int x = 0; x < up.width(); ++x) {
            up.at(y, x) =
                static_cast<float>(att.at4(row, 0, y / stride, x / stride));
          }
        }
        msp::write_gray_png((dump_dir / (test[i].id + ".png")).string(), up,
                            0.0f, peak > 0.0f ? peak : 1.0f);
      }
    }
  }

  json summary = {{"report", report_path},
                  {"standard_rank1", snap.standard.rank1},
                  {"standard_map", snap.standard.mAP},
                  {"cloth_changing_rank1", snap.cloth_changing.rank1},
                  {"cloth_changing_map", snap.cloth_changing.mAP}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_probe(const CommonArgs& args, const std::string& checkpoint,
              bool ignore_hash, const std::string& target) {
  msp::RunConfig config = resolve_config(args);
  msp::Trainer trainer(config, args.out);
  if (!checkpoint.empty()) {
    msp::load_checkpoint(checkpoint, trainer.model(), nullptr,
                         ignore_hash ? 0 : msp::config_hash(config));
  }
  std::vector<std::vector<double>> embeddings = trainer.test_embeddings();
  const msp::Dataset& test = trainer.test_data();
  std::vector<int> labels;
  labels.reserve(test.size());
  for (size_t i = 0; i < test.size(); ++i) {
    if (target == "hairstyle") {
      labels.push_back(static_cast<int>(test[i].hairstyle));
    } else if (target == "clothes") {
      labels.push_back(test[i].clothes);
    } else if (target == "identity") {
      labels.push_back(test[i].identity);
    } else {
      throw msp::ArgumentError(
          "probe target must be hairstyle, clothes or identity");
    }
  }
  msp::ProbeConfig pc;
  pc.seed = msp::RngStream(config.seed).derive("probe").key();
  msp::ProbeReport report = msp::linear_probe(embeddings, labels, target, pc);

  fs::create_directories(fs::path(args.out) / "reports");
  json j = {{"target", report.target},
            {"accuracy", report.accuracy},
            {"num_train", report.num_train},
            {"num_test", report.num_test},
            {"num_classes", report.num_classes}};
  const std::string path =
      (fs::path(args.out) / "reports" / ("probe_" + target + ".json")).string();
  std::ofstream out(path);
  if (!out) throw msp::DataError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloth-changing re-id: data synthesis, training, evaluation"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Render the synthetic dataset and write train/test splits");
  add_common(synth, synth_args);

  CommonArgs augment_args;
  CLI::App* augment = app.add_subcommand(
      "augment", "Write the training pool after offline hairstyle augmentation");
  add_common(augment, augment_args);

  CommonArgs train_args;
  bool resume = false;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_args);
  train->add_flag("--resume", resume, "Resume from checkpoints/last.ckpt");

  CommonArgs eval_args;
  std::string eval_checkpoint;
  bool eval_ignore_hash = false;
  bool dump_attention = false;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to load");
  eval->add_flag("--ignore-config-hash", eval_ignore_hash,
                 "Skip the checkpoint/config compatibility check");
  eval->add_flag("--dump-attention", dump_attention,
                 "Write per-sample attention maps as grayscale PNGs");

  CommonArgs probe_args;
  std::string probe_checkpoint;
  bool probe_ignore_hash = false;
  std::string probe_target = "hairstyle";
  CLI::App* probe = app.add_subcommand(
      "probe", "Linear decodability of a label from test embeddings");
  add_common(probe, probe_args);
  probe->add_option("--checkpoint", probe_checkpoint, "Checkpoint to load");
  probe->add_flag("--ignore-config-hash", probe_ignore_hash,
                  "Skip the checkpoint/config compatibility check");
  probe->add_option("--target", probe_target,
                    "hairstyle, clothes or identity");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_args);
    if (*augment) return run_augment(augment_args);
    if (*train) return run_train(train_args, resume);
    if (*eval) return run_eval(eval_args, eval_checkpoint, eval_ignore_hash,
                               dump_attention);
    if (*probe) return run_probe(probe_args, probe_checkpoint,
                                 probe_ignore_hash, probe_target);
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
