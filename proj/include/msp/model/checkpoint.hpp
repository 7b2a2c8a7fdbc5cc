#ifndef MSP_MODEL_CHECKPOINT_HPP_
#define MSP_MODEL_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "msp/model/model.hpp"
#include "msp/nn/adam.hpp"

namespace msp {

/// Versioned binary container: config hash, epoch counter, parameter blobs
/// by canonical name, batch-norm running statistics, and optimizer moments.
/// Layout is little-endian native; checkpoints are not meant to move
/// between architectures.
struct CheckpointMeta {
  uint64_t config_hash = 0;
  int64_t epoch = 0;
};

void save_checkpoint(const std::string& path, const ReidModel& model,
                     const nn::Adam* optimizer, const CheckpointMeta& meta);

/// Loads into an already-constructed model (shapes must match). Refuses a
/// mismatched config hash unless expected_hash is 0.
CheckpointMeta load_checkpoint(const std::string& path, ReidModel& model,
                               nn::Adam* optimizer, uint64_t expected_hash);

}  // namespace msp

#endif  // MSP_MODEL_CHECKPOINT_HPP_
