#include "msp/eval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"
#include "msp/nn/tape.hpp"

namespace msp {

std::string to_string(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::kStandard: return "standard";
    case ProtocolMode::kClothChanging: return "cloth_changing";
  }
  throw ArgumentError("unknown protocol mode");
}

ProtocolMode protocol_from_string(const std::string& name) {
  if (name == "standard") return ProtocolMode::kStandard;
  if (name == "cloth_changing") return ProtocolMode::kClothChanging;
  throw ArgumentError("unknown protocol mode '" + name +
                      "' (expected standard or cloth_changing)");
}

RetrievalItem retrieval_item(const Sample& sample) {
  return RetrievalItem{sample.identity, sample.camera, sample.clothes};
}

std::vector<uint8_t> valid_gallery_mask(const RetrievalItem& query,
                                        const std::vector<RetrievalItem>& gallery,
                                        const Protocol& protocol) {
  std::vector<uint8_t> mask(gallery.size(), 1);
  for (size_t i = 0; i < gallery.size(); ++i) {
    const RetrievalItem& g = gallery[i];
    if (protocol.cross_camera_only && g.camera == query.camera) {
      mask[i] = 0;
      continue;
    }
    if (g.identity != query.identity) continue;
    if (g.camera == query.camera) mask[i] = 0;
    if (protocol.mode == ProtocolMode::kClothChanging &&
        g.clothes == query.clothes) {
      mask[i] = 0;
    }
  }
  return mask;
}

std::vector<std::vector<double>> extract_embeddings(
    ReidModel& model, const Dataset& data, const std::vector<size_t>& indices,
    int batch_size) {
  if (batch_size <= 0) throw ArgumentError("batch size must be positive");
  std::vector<std::vector<double>> out;
  out.reserve(indices.size());
  for (size_t start = 0; start < indices.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(indices.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Image*> batch;
    batch.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      batch.push_back(&data[indices[i]].image);
    }
    nn::Tape tape;
    ModelOutputs outs = model.forward(tape, batch, ForwardMode::kEval,
                                      /*update_bn_stats=*/false);
    const nn::Tensor& emb = tape.val(outs.embedding_post_bn);
    const int n = emb.dim(0);
    const int d = emb.dim(1);
    for (int row = 0; row < n; ++row) {
      std::vector<double> e(static_cast<size_t>(d));
      double norm_sq = 0.0;
      for (int j = 0; j < d; ++j) {
        e[static_cast<size_t>(j)] = emb.at2(row, j);
        norm_sq += e[static_cast<size_t>(j)] * e[static_cast<size_t>(j)];
      }
      const double norm = std::sqrt(norm_sq);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw NumericError("embedding has zero or non-finite norm");
      }
      for (double& v : e) v /= norm;
      out.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Scores one protocol pass over a gallery subset given by active indices.
RetrievalReport score_subset(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<RetrievalItem>& query_items,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<RetrievalItem>& gallery_items,
    const std::vector<size_t>& active, const Protocol& protocol,
    int cmc_length) {
  if (query_embeddings.size() != query_items.size()) {
    throw ArgumentError("query embedding/item count mismatch");
  }
  if (gallery_embeddings.size() != gallery_items.size()) {
    throw ArgumentError("gallery embedding/item count mismatch");
  }
  if (cmc_length <= 0) throw ArgumentError("cmc length must be positive");

  std::vector<RetrievalItem> active_items;
  active_items.reserve(active.size());
  for (size_t gi : active) active_items.push_back(gallery_items[gi]);

  RetrievalReport report;
  report.protocol = protocol;
  report.cmc.assign(static_cast<size_t>(cmc_length), 0.0);

  std::vector<size_t> order;
  for (size_t qi = 0; qi < query_embeddings.size(); ++qi) {
    const std::vector<uint8_t> valid =
        valid_gallery_mask(query_items[qi], active_items, protocol);

    order.clear();
    std::vector<double> scores(active.size(), 0.0);
    for (size_t k = 0; k < active.size(); ++k) {
      if (!valid[k]) continue;
      scores[k] = dot(query_embeddings[qi], gallery_embeddings[active[k]]);
      order.push_back(k);
    }
    // Descending similarity; equal scores keep ascending gallery order.
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return active[a] < active[b];
    });

    int num_pos = 0;
    for (size_t k : order) {
      if (active_items[k].identity == query_items[qi].identity) ++num_pos;
    }
    if (num_pos == 0) continue;  // unscoreable query

    double ap = 0.0;
    int hits = 0;
    int first_hit_rank = -1;
    for (size_t rank = 0; rank < order.size(); ++rank) {
      if (active_items[order[rank]].identity != query_items[qi].identity) {
        continue;
      }
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      if (first_hit_rank < 0) first_hit_rank = static_cast<int>(rank);
    }
    ap /= static_cast<double>(num_pos);

    report.per_query_ap.push_back(ap);
    report.mAP += ap;
    for (int k = first_hit_rank; k < cmc_length; ++k) {
      report.cmc[static_cast<size_t>(k)] += 1.0;
    }
    ++report.num_queries;
  }

  if (report.num_queries == 0) {
    throw EvalError("no query has a valid positive under this protocol");
  }
  report.mAP /= static_cast<double>(report.num_queries);
  for (double& v : report.cmc) v /= static_cast<double>(report.num_queries);
  report.rank1 = report.cmc[0];
  return report;
}

}  // namespace

RetrievalReport compute_cmc_map(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<RetrievalItem>& query_items,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<RetrievalItem>& gallery_items, const Protocol& protocol,
    int cmc_length) {
  std::vector<size_t> all(gallery_items.size());
  std::iota(all.begin(), all.end(), size_t{0});
  return score_subset(query_embeddings, query_items, gallery_embeddings,
                      gallery_items, all, protocol, cmc_length);
}

RetrievalReport compute_cmc_map_single_shot(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<RetrievalItem>& query_items,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<RetrievalItem>& gallery_items, const Protocol& protocol,
    int trials, uint64_t seed, int cmc_length) {
  if (trials <= 0) throw ArgumentError("trial count must be positive");

  std::map<int, std::vector<size_t>> by_identity;
  for (size_t i = 0; i < gallery_items.size(); ++i) {
    by_identity[gallery_items[i].identity].push_back(i);
  }

  RetrievalReport mean;
  mean.protocol = protocol;
  mean.cmc.assign(static_cast<size_t>(cmc_length), 0.0);
  RngStream rng(seed);
  for (int t = 0; t < trials; ++t) {
    RngStream trial_rng = rng.derive("single-shot-trial", t);
    std::vector<size_t> active;
    for (const auto& [identity, indices] : by_identity) {
      RngStream pick = trial_rng.derive("identity", identity);
      active.push_back(indices[pick.uniform_int(indices.size())]);
    }
    std::sort(active.begin(), active.end());
    RetrievalReport r =
        score_subset(query_embeddings, query_items, gallery_embeddings,
                     gallery_items, active, protocol, cmc_length);
    mean.rank1 += r.rank1;
    mean.mAP += r.mAP;
    for (int k = 0; k < cmc_length; ++k) {
      mean.cmc[static_cast<size_t>(k)] += r.cmc[static_cast<size_t>(k)];
    }
    mean.num_queries = r.num_queries;
  }
  mean.rank1 /= static_cast<double>(trials);
  mean.mAP /= static_cast<double>(trials);
  for (double& v : mean.cmc) v /= static_cast<double>(trials);
  return mean;
}

}  // namespace msp
