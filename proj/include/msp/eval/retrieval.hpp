#ifndef MSP_EVAL_RETRIEVAL_HPP_
#define MSP_EVAL_RETRIEVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "msp/data/sample.hpp"
#include "msp/model/model.hpp"

namespace msp {

enum class ProtocolMode { kStandard, kClothChanging };

std::string to_string(ProtocolMode mode);
ProtocolMode protocol_from_string(const std::string& name);

/// Gallery filtering rules. kStandard discards same-identity same-camera
/// items (the junk rule); kClothChanging additionally discards same-identity
/// same-clothes items, so only cloth-changed true matches remain. With
/// cross_camera_only set, every same-camera item is discarded outright.
struct Protocol {
  ProtocolMode mode = ProtocolMode::kStandard;
  bool cross_camera_only = false;
};

/// Labels that drive protocol filtering.
struct RetrievalItem {
  int identity = 0;
  int camera = 0;
  int clothes = 0;
};

RetrievalItem retrieval_item(const Sample& sample);

/// 1 = gallery item participates in this query's ranking; 0 = excluded
/// (counts neither as match nor as distractor).
std::vector<uint8_t> valid_gallery_mask(const RetrievalItem& query,
                                        const std::vector<RetrievalItem>& gallery,
                                        const Protocol& protocol);

struct RetrievalReport {
  Protocol protocol;
  double rank1 = 0;
  double mAP = 0;
  std::vector<double> cmc;           // cmc[k] = hit rate within top-(k+1)
  std::vector<double> per_query_ap;  // scored queries only
  int num_queries = 0;               // queries with >= 1 valid positive
};

/// Runs eval-mode forwards over the listed samples and returns one
/// L2-normalized post-BN embedding per sample (empty input -> empty output).
std::vector<std::vector<double>> extract_embeddings(
    ReidModel& model, const Dataset& data, const std::vector<size_t>& indices,
    int batch_size = 32);

/// Ranks the gallery by descending cosine similarity (dot product of unit
/// vectors; ties broken by gallery index) and scores CMC/mAP. Queries with
/// no valid positive are dropped from all averages; if none survives an
/// EvalError is raised.
RetrievalReport compute_cmc_map(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<RetrievalItem>& query_items,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<RetrievalItem>& gallery_items, const Protocol& protocol,
    int cmc_length = 20);

/// Trial-averaged single-gallery-shot variant: each trial keeps one random
/// gallery image per identity, scores as usual, and metrics are averaged
/// over trials.
RetrievalReport compute_cmc_map_single_shot(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<RetrievalItem>& query_items,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<RetrievalItem>& gallery_items, const Protocol& protocol,
    int trials, uint64_t seed, int cmc_length = 20);

}  // namespace msp

#endif  // MSP_EVAL_RETRIEVAL_HPP_
