#include "msp/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include "json.hpp"
#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"
#include "msp/cpre/cpre.hpp"
#include "msp/data/dataset_io.hpp"
#include "msp/data/pk_sampler.hpp"
#include "msp/data/synthetic.hpp"
#include "msp/hsoa/augment.hpp"
#include "msp/model/checkpoint.hpp"

namespace msp {

namespace fs = std::filesystem;
using nlohmann::json;

Trainer::Trainer(RunConfig config, std::string out_dir)
    : config_(std::move(config)), out_dir_(std::move(out_dir)) {
  config_.validate();
  schema_ = default_label_schema();
  config_hash_ = config_hash(config_);
  prepare_data();
  build_label_maps();

  ModelConfig mc = config_.model;
  mc.num_identities = static_cast<int>(identity_class_.size());
  mc.num_clothes_classes = static_cast<int>(clothes_class_.size());
  model_ = std::make_unique<ReidModel>(
      mc, RngStream(config_.seed).derive("model").key());
  optimizer_ = std::make_unique<nn::Adam>(config_.optimizer.lr,
                                          config_.optimizer.weight_decay);
  cache_masks();
}

void Trainer::prepare_data() {
  if (config_.dataset.type == DatasetType::kSynthetic) {
    Dataset full = generate_synthetic_dataset(config_.dataset.synthetic);
    FactoredSplit split = factored_split(full, config_.dataset.split);
    for (size_t i : split.train) train_data_.add(full[i]);
    for (size_t i : split.test) test_data_.add(full[i]);
  } else {
    train_data_ = load_dataset(config_.dataset.path + "/train");
    test_data_ = load_dataset(config_.dataset.path + "/test");
  }
  if (train_data_.empty()) throw DataError("training split is empty");
  if (test_data_.empty()) throw DataError("test split is empty");
  result_.train_originals = static_cast<int>(train_data_.size());

  if (!config_.hsoa.enabled) return;

  std::unique_ptr<HairSynthesizer> synthesizer;
  if (config_.hsoa.synthesizer == "file") {
    synthesizer =
        std::make_unique<FileAdapterSynthesizer>(config_.hsoa.file_root);
  } else {
    synthesizer = std::make_unique<ProceduralStubSynthesizer>();
  }

  // Offline pass: every original with a parsing map is re-rendered under
  // each configured style it does not already wear.
  const size_t originals = train_data_.size();
  for (size_t i = 0; i < originals; ++i) {
    const Sample& source = train_data_[i];
    if (!source.semantic_map.has_value()) continue;
    std::vector<Hairstyle> styles;
    for (Hairstyle s : config_.hsoa.styles) {
      if (s != source.hairstyle) styles.push_back(s);
    }
    if (styles.empty()) continue;
    RegionMasks masks = derive_masks(*source.semantic_map, schema_);
    AugmentResult aug =
        augment_identity(source, masks, *synthesizer, styles);
    result_.hsoa_skipped += static_cast<int>(aug.skipped_styles.size());
    for (Sample& s : aug.samples) train_data_.add(std::move(s));
  }
  result_.train_augmented =
      static_cast<int>(train_data_.size() - originals);
}

void Trainer::build_label_maps() {
  for (int identity : train_data_.identities()) {
    identity_class_.emplace(identity,
                            static_cast<int>(identity_class_.size()));
  }
  for (size_t i = 0; i < train_data_.size(); ++i) {
    clothes_class_.emplace(train_data_[i].clothes, 0);
  }
  int next = 0;
  for (auto& [raw, cls] : clothes_class_) cls = next++;

  for (const auto& [identity, clothes_list] :
       train_data_.clothes_by_identity()) {
    std::vector<int> classes;
    for (int raw : clothes_list) classes.push_back(clothes_class_.at(raw));
    std::sort(classes.begin(), classes.end());
    clothes_by_identity_class_.emplace(identity_class_.at(identity),
                                       std::move(classes));
  }
}

void Trainer::cache_masks() {
  const int fh = model_->config().feature_height();
  const int fw = model_->config().feature_width();
  auto build = [&](const Dataset& data, bool with_cloth) {
    std::vector<MaskCache> cache(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
      if (!data[i].semantic_map.has_value()) continue;
      RegionMasks masks = derive_masks(*data[i].semantic_map, schema_);
      MaskCache& c = cache[i];
      c.has = true;
      c.face_ds = downsample_mask(masks.face, fh, fw);
      c.limbs_ds = downsample_mask(masks.limbs, fh, fw);
      c.hair_ds = downsample_mask(masks.hair, fh, fw);
      c.target = attention_target(c.face_ds, c.limbs_ds, c.hair_ds,
                                  config_.loss.weights.epsilon);
      if (with_cloth) {
        c.dilated_cloth =
            dilate_mask(masks.cloth, config_.cpre.cloth_dilation_radius);
      }
    }
    return cache;
  };
  train_masks_ = build(train_data_, /*with_cloth=*/true);
  test_masks_ = build(test_data_, /*with_cloth=*/false);
}

double Trainer::lr_for_epoch(int epoch) const {
  double lr = config_.optimizer.lr;
  for (int d : config_.schedule.decay_epochs) {
    if (epoch >= d) lr *= config_.schedule.decay_factor;
  }
  return lr;
}

void Trainer::train_epoch(int epoch, std::ofstream& log) {
  RngStream epoch_rng = RngStream(config_.seed).derive("epoch", epoch);
  std::vector<size_t> pool(train_data_.size());
  std::iota(pool.begin(), pool.end(), size_t{0});
  std::vector<PkBatch> batches =
      pk_epoch_batches(train_data_, pool, config_.sampler.p, config_.sampler.k,
                       epoch_rng.derive("pk"));

  for (size_t b = 0; b < batches.size(); ++b) {
    const std::vector<size_t>& indices = batches[b].indices;
    std::vector<Sample> originals;
    originals.reserve(indices.size());
    for (size_t idx : indices) originals.push_back(train_data_[idx]);

    std::vector<Sample> batch =
        mix_batch(originals, config_.cpre, schema_,
                  epoch_rng.derive("cpre-batch", b));

    // Audit: erased samples must match the original everywhere outside the
    // dilated clothing region.
    for (size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].view != SampleView::kErased) continue;
      const MaskGrid& cloth = train_masks_[indices[i]].dilated_cloth;
      const Image& before = originals[i].image;
      const Image& after = batch[i].image;
      ++result_.cpre_audit.erased_samples;
      for (int y = 0; y < before.height(); ++y) {
        for (int x = 0; x < before.width(); ++x) {
          if (cloth.at(y, x)) continue;
          ++result_.cpre_audit.non_cloth_pixels;
          for (int c = 0; c < 3; ++c) {
            if (before.at(c, y, x) != after.at(c, y, x)) {
              ++result_.cpre_audit.non_cloth_pixels_modified;
              break;
            }
          }
        }
      }
    }

    std::vector<const Image*> images;
    std::vector<int> id_labels;
    std::vector<int> cloth_labels;
    std::vector<AttentionTarget> targets;
    images.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      images.push_back(&batch[i].image);
      id_labels.push_back(identity_class_.at(batch[i].identity));
      cloth_labels.push_back(clothes_class_.at(batch[i].clothes));
      const MaskCache& c = train_masks_[indices[i]];
      if (c.has) {
        targets.push_back(c.target);
      } else {
        AttentionTarget absent;
        absent.absent = true;
        targets.push_back(absent);
      }
    }

    nn::Tape tape;
    ModelOutputs out = model_->forward(tape, images, ForwardMode::kTrain,
                                       /*update_bn_stats=*/true);

    nn::Var l_id = id_loss(tape, out.id_logits, id_labels);
    nn::Var l_tri = triplet_loss(tape, out.embedding_pre_bn, id_labels,
                                 config_.loss.margin);
    nn::Var l_att = config_.model.rpa_enabled
                        ? attention_loss(tape, out.attention_map, targets,
                                         config_.loss.weights)
                        : tape.leaf(nn::Tensor::scalar(0.0));
    const bool cal_on = config_.loss.weights.lambda_cal > 0.0;
    nn::Var l_cal = tape.leaf(nn::Tensor::scalar(0.0));
    nn::Var classifier_term;
    if (cal_on) {
      CalLoss cal =
          cal_loss(tape, out.clothes_logits_head, out.clothes_logits_adv,
                   cloth_labels, id_labels, clothes_by_identity_class_);
      l_cal = cal.adversarial_term;
      classifier_term = cal.classifier_term;
    }
    nn::Var total =
        total_loss(tape, l_id, l_tri, l_att, l_cal, config_.loss.weights);
    // The clothes classifier trains alongside but its cross-entropy is not
    // part of the reported objective.
    nn::Var objective =
        cal_on ? nn::add(tape, total, classifier_term) : total;
    tape.backward(objective);

    std::map<std::string, nn::Tensor> grads;
    for (const auto& [name, var] : out.param_vars) {
      grads.emplace(name, tape.grad(var));
    }
    optimizer_->step(model_->params(), grads);

    const int64_t step =
        static_cast<int64_t>(epoch) * static_cast<int64_t>(batches.size()) +
        static_cast<int64_t>(b) + 1;
    json line = {{"epoch", epoch + 1},
                 {"step", step},
                 {"lr", optimizer_->lr()},
                 {"L_id", tape.val(l_id)[0]},
                 {"L_tri", tape.val(l_tri)[0]},
                 {"L_att", tape.val(l_att)[0]},
                 {"L_cal", tape.val(l_cal)[0]},
                 {"L_total", tape.val(total)[0]}};
    log << line.dump() << "\n";
  }
  log.flush();
}

EvalSnapshot Trainer::evaluate(int epoch) {
  std::vector<size_t> indices(test_data_.size());
  std::iota(indices.begin(), indices.end(), size_t{0});

  EvalSnapshot snap;
  snap.epoch = epoch;

  const int batch_size = 32;
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(test_data_.size());
  const int fh = model_->config().feature_height();
  const int fw = model_->config().feature_width();
  for (size_t start = 0; start < indices.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(indices.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Image*> images;
    for (size_t i = start; i < end; ++i) {
      images.push_back(&test_data_[indices[i]].image);
    }
    nn::Tape tape;
    ModelOutputs out = model_->forward(tape, images, ForwardMode::kEval,
                                       /*update_bn_stats=*/false);
    const nn::Tensor& emb = tape.val(out.embedding_post_bn);
    const nn::Tensor& att = tape.val(out.attention_map);
    for (size_t i = start; i < end; ++i) {
      const int row = static_cast<int>(i - start);
      std::vector<double> e(static_cast<size_t>(emb.dim(1)));
      double norm_sq = 0.0;
      for (int j = 0; j < emb.dim(1); ++j) {
        e[static_cast<size_t>(j)] = emb.at2(row, j);
        norm_sq += e[static_cast<size_t>(j)] * e[static_cast<size_t>(j)];
      }
      const double norm = std::sqrt(norm_sq);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw NumericError("embedding has zero or non-finite norm");
      }
      for (double& v : e) v /= norm;
      embeddings.push_back(std::move(e));

      const MaskCache& c = test_masks_[indices[i]];
      if (!c.has) continue;
      SoftGrid a(fh, fw, 0.0f);
      for (int y = 0; y < fh; ++y) {
        for (int x = 0; x < fw; ++x) {
          a.at(y, x) = static_cast<float>(att.at4(row, 0, y, x));
        }
      }
      AttentionMass mass = attention_mass(a, c.face_ds, c.limbs_ds, c.hair_ds);
      snap.mean_attention.hair += mass.hair;
      snap.mean_attention.positive += mass.positive;
      ++snap.attention_samples;
    }
  }
  if (snap.attention_samples > 0) {
    snap.mean_attention.hair /= snap.attention_samples;
    snap.mean_attention.positive /= snap.attention_samples;
  }

  std::vector<RetrievalItem> items;
  items.reserve(test_data_.size());
  for (size_t i = 0; i < test_data_.size(); ++i) {
    items.push_back(retrieval_item(test_data_[i]));
  }
  snap.standard = compute_cmc_map(embeddings, items, embeddings, items,
                                  Protocol{ProtocolMode::kStandard, false});
  snap.cloth_changing =
      compute_cmc_map(embeddings, items, embeddings, items,
                      Protocol{ProtocolMode::kClothChanging, false});
  return snap;
}

std::vector<std::vector<double>> Trainer::test_embeddings() {
  std::vector<size_t> indices(test_data_.size());
  std::iota(indices.begin(), indices.end(), size_t{0});
  return extract_embeddings(*model_, test_data_, indices);
}

TrainResult Trainer::run(bool resume) {
  fs::create_directories(fs::path(out_dir_) / "checkpoints");
  fs::create_directories(fs::path(out_dir_) / "logs");
  fs::create_directories(fs::path(out_dir_) / "reports");
  const std::string last_path =
      (fs::path(out_dir_) / "checkpoints" / "last.ckpt").string();
  const std::string best_path =
      (fs::path(out_dir_) / "checkpoints" / "best.ckpt").string();
  const std::string log_path =
      (fs::path(out_dir_) / "logs" / "train.jsonl").string();
  const std::string eval_log_path =
      (fs::path(out_dir_) / "logs" / "eval.jsonl").string();

  int first_epoch = 0;
  if (resume && fs::exists(last_path)) {
    CheckpointMeta meta =
        load_checkpoint(last_path, *model_, optimizer_.get(), config_hash_);
    first_epoch = static_cast<int>(meta.epoch);
  }

  std::ofstream log(log_path, first_epoch > 0 ? std::ios::app : std::ios::trunc);
  std::ofstream eval_log(eval_log_path,
                         first_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log || !eval_log) {
    throw DataError("cannot open log files under '" + out_dir_ + "'");
  }

  bool have_eval = false;
  for (int epoch = first_epoch; epoch < config_.schedule.epochs; ++epoch) {
    optimizer_->set_lr(lr_for_epoch(epoch));
    try {
      train_epoch(epoch, log);
    } catch (const NumericError& e) {
      result_.aborted = true;
      result_.abort_reason = e.what();
      break;
    }
    result_.epochs_completed = epoch + 1;
    save_checkpoint(last_path, *model_, optimizer_.get(),
                    CheckpointMeta{config_hash_, epoch + 1});

    const bool last = epoch + 1 == config_.schedule.epochs;
    if ((epoch + 1) % config_.schedule.eval_every == 0 || last) {
      EvalSnapshot snap = evaluate(epoch + 1);
      result_.final_eval = snap;
      have_eval = true;
      if (snap.cloth_changing.mAP > result_.best_cloth_changing_map) {
        result_.best_cloth_changing_map = snap.cloth_changing.mAP;
        result_.best_epoch = epoch + 1;
        save_checkpoint(best_path, *model_, optimizer_.get(),
                        CheckpointMeta{config_hash_, epoch + 1});
      }
      json line = {{"epoch", snap.epoch},
                   {"standard_rank1", snap.standard.rank1},
                   {"standard_map", snap.standard.mAP},
                   {"cloth_changing_rank1", snap.cloth_changing.rank1},
                   {"cloth_changing_map", snap.cloth_changing.mAP},
                   {"attention_hair", snap.mean_attention.hair},
                   {"attention_positive", snap.mean_attention.positive}};
      eval_log << line.dump() << "\n";
      eval_log.flush();
    }
  }

  if (!result_.aborted && !have_eval) {
    result_.final_eval = evaluate(result_.epochs_completed);
  }

  if (!result_.aborted) {
    std::vector<std::vector<double>> embeddings = test_embeddings();
    std::vector<int> hair_labels;
    std::vector<int> cloth_labels;
    for (size_t i = 0; i < test_data_.size(); ++i) {
      hair_labels.push_back(static_cast<int>(test_data_[i].hairstyle));
      cloth_labels.push_back(test_data_[i].clothes);
    }
    ProbeConfig pc;
    pc.seed = RngStream(config_.seed).derive("probe").key();
    result_.hairstyle_probe =
        linear_probe(embeddings, hair_labels, "hairstyle", pc);
    result_.clothes_probe = linear_probe(embeddings, cloth_labels, "clothes", pc);
  }

  write_summary(result_);
  return result_;
}

namespace {

json report_to_json(const RetrievalReport& r) {
  return {{"protocol", to_string(r.protocol.mode)},
          {"rank1", r.rank1},
          {"mAP", r.mAP},
          {"cmc", r.cmc},
          {"num_queries", r.num_queries}};
}

json probe_to_json(const ProbeReport& p) {
  return {{"target", p.target},
          {"accuracy", p.accuracy},
          {"num_train", p.num_train},
          {"num_test", p.num_test},
          {"num_classes", p.num_classes}};
}

}  // namespace

void Trainer::write_summary(const TrainResult& result) const {
  json j;
  j["config"] = config_to_json(config_);
  j["config_hash"] = config_hash_;
  j["aborted"] = result.aborted;
  j["abort_reason"] = result.abort_reason;
  j["epochs_completed"] = result.epochs_completed;
  j["best"] = {{"epoch", result.best_epoch},
               {"cloth_changing_map", result.best_cloth_changing_map}};
  j["final"] = {
      {"epoch", result.final_eval.epoch},
      {"standard", report_to_json(result.final_eval.standard)},
      {"cloth_changing", report_to_json(result.final_eval.cloth_changing)},
      {"attention_mass",
       {{"hair", result.final_eval.mean_attention.hair},
        {"positive", result.final_eval.mean_attention.positive},
        {"num_samples", result.final_eval.attention_samples}}}};
  if (!result.aborted) {
    j["final"]["probes"] = {
        {"hairstyle", probe_to_json(result.hairstyle_probe)},
        {"clothes", probe_to_json(result.clothes_probe)}};
  }
  j["cpre_audit"] = {
      {"erased_samples", result.cpre_audit.erased_samples},
      {"non_cloth_pixels", result.cpre_audit.non_cloth_pixels},
      {"non_cloth_pixels_modified",
       result.cpre_audit.non_cloth_pixels_modified}};
  j["train_pool"] = {{"originals", result.train_originals},
                     {"augmented", result.train_augmented},
                     {"hsoa_skipped", result.hsoa_skipped}};

  std::ofstream out(
      (fs::path(out_dir_) / "reports" / "summary.json").string());
  if (!out) throw DataError("cannot write summary under '" + out_dir_ + "'");
  out << j.dump(2) << "\n";
}

}  // namespace msp
