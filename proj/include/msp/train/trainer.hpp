#ifndef MSP_TRAIN_TRAINER_HPP_
#define MSP_TRAIN_TRAINER_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "msp/data/sample.hpp"
#include "msp/eval/probe.hpp"
#include "msp/eval/retrieval.hpp"
#include "msp/losses/losses.hpp"
#include "msp/masks/label_schema.hpp"
#include "msp/model/model.hpp"
#include "msp/nn/adam.hpp"
#include "msp/train/config.hpp"

namespace msp {

/// Retrieval + diagnostics measured on the test set at one epoch.
struct EvalSnapshot {
  int epoch = 0;
  RetrievalReport standard;
  RetrievalReport cloth_changing;
  AttentionMass mean_attention;  // mean over test samples with masks
  int attention_samples = 0;
};

/// Counters proving the eraser never leaves the clothing region: taken over
/// every erased sample actually fed to the model.
struct CpreAudit {
  int64_t erased_samples = 0;
  int64_t non_cloth_pixels = 0;
  int64_t non_cloth_pixels_modified = 0;
};

struct TrainResult {
  bool aborted = false;
  std::string abort_reason;
  int epochs_completed = 0;
  EvalSnapshot final_eval;
  double best_cloth_changing_map = 0;
  int best_epoch = -1;
  ProbeReport hairstyle_probe;
  ProbeReport clothes_probe;
  CpreAudit cpre_audit;
  int train_originals = 0;
  int train_augmented = 0;
  int hsoa_skipped = 0;
};

/// Owns one full run: data preparation (offline hairstyle augmentation),
/// PK-batched epochs with the erasing mix, the four-term objective, step
/// decay, periodic evaluation, checkpoints and JSONL loss logging.
///
/// Artifacts under out_dir:
///   checkpoints/last.ckpt, checkpoints/best.ckpt   (best = cloth-changing mAP)
///   logs/train.jsonl                               one record per step
///   reports/summary.json                           final metrics + audit
class Trainer {
 public:
  Trainer(RunConfig config, std::string out_dir);

  /// Trains to completion (or resumes from checkpoints/last.ckpt) and writes
  /// all artifacts. Returns the collected result; a non-finite loss aborts
  /// the run but still reports and keeps the last good checkpoint.
  TrainResult run(bool resume = false);

  /// Evaluation of the current weights on the held-out set; also usable
  /// standalone after loading a checkpoint.
  EvalSnapshot evaluate(int epoch);

  const Dataset& train_data() const { return train_data_; }
  const Dataset& test_data() const { return test_data_; }
  ReidModel& model() { return *model_; }
  const RunConfig& config() const { return config_; }

  /// Embeddings of the whole test set (eval mode, unit-normalized).
  std::vector<std::vector<double>> test_embeddings();

 private:
  void prepare_data();
  void build_label_maps();
  void cache_masks();
  double lr_for_epoch(int epoch) const;
  void train_epoch(int epoch, std::ofstream& log);
  void write_summary(const TrainResult& result) const;

  /// Per-sample mask bundle at feature resolution, precomputed once.
  struct MaskCache {
    bool has = false;
    SoftGrid face_ds, limbs_ds, hair_ds;
    AttentionTarget target;
    MaskGrid dilated_cloth;  // input resolution; drives the erase audit
  };

  RunConfig config_;
  std::string out_dir_;
  LabelSchema schema_;
  Dataset train_data_;  // originals followed by augmented samples
  Dataset test_data_;
  std::map<int, int> identity_class_;      // raw identity -> train class id
  std::map<int, int> clothes_class_;       // raw clothes id -> train class id
  std::map<int, std::vector<int>> clothes_by_identity_class_;
  std::vector<MaskCache> train_masks_;
  std::vector<MaskCache> test_masks_;
  std::unique_ptr<ReidModel> model_;
  std::unique_ptr<nn::Adam> optimizer_;
  uint64_t config_hash_ = 0;
  TrainResult result_;
};

}  // namespace msp

#endif  // MSP_TRAIN_TRAINER_HPP_
