#include "msp/data/pk_sampler.hpp"

#include <algorithm>
#include <map>

#include "msp/core/error.hpp"

namespace msp {

std::vector<PkBatch> pk_epoch_batches(const Dataset& dataset,
                                      const std::vector<size_t>& pool,
                                      int identities_per_batch,
                                      int samples_per_identity,
                                      RngStream rng) {
  const int P = identities_per_batch;
  const int K = samples_per_identity;
  if (P < 1 || K < 1) {
    throw ConfigError("pk sampler: P and K must be >= 1");
  }

  std::map<int, std::vector<size_t>> by_identity;
  for (size_t idx : pool) {
    if (idx >= dataset.size()) {
      throw ArgumentError("pk sampler: pool index out of range");
    }
    by_identity[dataset[idx].identity].push_back(idx);
  }

  std::vector<int> ids;
  ids.reserve(by_identity.size());
  for (const auto& [id, v] : by_identity) ids.push_back(id);
  if (static_cast<int>(ids.size()) < P) {
    throw ConfigError("pk sampler: P=" + std::to_string(P) +
                      " exceeds identity count " +
                      std::to_string(ids.size()));
  }

  rng.shuffle(ids);

  const size_t num_batches = (ids.size() + P - 1) / P;
  std::vector<PkBatch> batches;
  batches.reserve(num_batches);

  for (size_t b = 0; b < num_batches; ++b) {
    PkBatch batch;
    batch.indices.reserve(static_cast<size_t>(P) * K);
    for (int p = 0; p < P; ++p) {
      // The wrap in the last batch revisits already-covered identities; a
      // batch never repeats an identity since P <= ids.size().
      const int identity = ids[(b * P + p) % ids.size()];
      const auto& candidates = by_identity[identity];

      if (candidates.size() >= static_cast<size_t>(K)) {
        std::vector<size_t> order(candidates.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (int k = 0; k < K; ++k) {
          batch.indices.push_back(candidates[order[k]]);
        }
      } else {
        for (int k = 0; k < K; ++k) {
          batch.indices.push_back(
              candidates[rng.uniform_int(candidates.size())]);
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace msp
