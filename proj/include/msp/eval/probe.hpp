#ifndef MSP_EVAL_PROBE_HPP_
#define MSP_EVAL_PROBE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace msp {

struct ProbeConfig {
  double train_fraction = 0.7;
  int epochs = 300;
  double lr = 0.05;
  double weight_decay = 1e-4;
  uint64_t seed = 0;

  void validate() const;
};

struct ProbeReport {
  std::string target;  // what the labels describe, e.g. "hairstyle"
  double accuracy = 0;
  int num_train = 0;
  int num_test = 0;
  int num_classes = 0;
};

/// Measures how linearly decodable a label is from frozen embeddings:
/// stratified train/test split, multinomial logistic regression (full-batch
/// Adam from zero init), held-out accuracy. Labels may be arbitrary ints;
/// fewer than two distinct labels or an empty held-out set raises EvalError.
ProbeReport linear_probe(const std::vector<std::vector<double>>& embeddings,
                         const std::vector<int>& labels,
                         const std::string& target,
                         const ProbeConfig& config = {});

}  // namespace msp

#endif  // MSP_EVAL_PROBE_HPP_
