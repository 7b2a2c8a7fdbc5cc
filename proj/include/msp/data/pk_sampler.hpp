#ifndef MSP_DATA_PK_SAMPLER_HPP_
#define MSP_DATA_PK_SAMPLER_HPP_

#include <vector>

#include "msp/core/rng.hpp"
#include "msp/data/sample.hpp"

namespace msp {

/// One PK batch: exactly P identities x K sample indices each.
struct PkBatch {
  std::vector<size_t> indices;
};

/// Builds one epoch of PK batches over `pool` (sample indices into the
/// dataset). Each batch holds exactly P distinct identities with K samples
/// each; identities with fewer than K pooled samples are drawn with
/// replacement. An epoch is ceil(num_identities / P) batches and covers
/// every identity at least once (the last batch tops up from the start of
/// the shuffled identity list).
std::vector<PkBatch> pk_epoch_batches(const Dataset& dataset,
                                      const std::vector<size_t>& pool,
                                      int identities_per_batch,
                                      int samples_per_identity,
                                      RngStream rng);

}  // namespace msp

#endif  // MSP_DATA_PK_SAMPLER_HPP_
