#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tac/core.hpp"
#include "tac/error.hpp"
#include "tac/mapper.hpp"
#include "tac/metrics.hpp"
#include "tac/rng.hpp"

namespace tac::supervision {

enum class ProtocolKind { fewshot, corrupt, transfer, pairwise };

// CLI-facing protocol description; exactly the fields its kind needs.
struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::fewshot;
  std::optional<std::size_t> k_labels;
  std::optional<double> corrupt_rate;
  std::optional<std::pair<std::string, std::string>> pair;
  std::uint64_t seed = 0;

  void validate() const {
    const bool want_k = kind == ProtocolKind::fewshot;
    const bool want_rate = kind == ProtocolKind::corrupt;
    const bool want_pair = kind == ProtocolKind::pairwise;
    if (k_labels.has_value() != want_k || corrupt_rate.has_value() != want_rate ||
        pair.has_value() != want_pair)
      throw Error("invalid-protocol-spec",
                  "fields present do not match protocol kind");
  }
};

// Uniform subsample of k records without replacement, redrawn (up to 100
// attempts) until both classes are present. Record order follows the original
// dataset; scores and labels are untouched.
inline LabeledDataset fewshot_subsample(const LabeledDataset& ds, std::size_t k,
                                        std::uint64_t seed) {
  if (k == 0) throw Error("k-exceeds-n", "k must be positive");
  if (k > ds.size())
    throw Error("k-exceeds-n", "k=" + std::to_string(k) + " but dataset has " +
                                   std::to_string(ds.size()) + " records");
  Rng rng = stream_rng(seed, "fewshot");
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto idx = sample_without_replacement(rng, ds.size(), k);
    bool has_pos = false, has_neg = false;
    for (const std::size_t i : idx) (ds.records[i].label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) continue;
    LabeledDataset out;
    out.source_tag = ds.source_tag + "#fewshot(k=" + std::to_string(k) + ")";
    out.seed = seed;
    out.records.reserve(k);
    for (const std::size_t i : idx) out.records.push_back(ds.records[i]);
    return out;
  }
  throw Error("both-classes-unattainable",
              "no subsample of size " + std::to_string(k) +
                  " with both classes after 100 attempts");
}

// Flips the labels of exactly floor(rate * n) records, chosen uniformly
// without replacement from a stream that depends only on (seed, n). Applying
// the same corruption twice restores the original labels.
inline LabeledDataset corrupt_labels(const LabeledDataset& ds, double rate,
                                     std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw Error("out-of-range", "corruption rate outside [0,1]");
  LabeledDataset out = ds;
  out.seed = seed;
  const auto n_flip = static_cast<std::size_t>(
      std::floor(rate * static_cast<double>(ds.size())));
  if (n_flip == 0) return out;
  out.source_tag = ds.source_tag + "#corrupt(rate=" + std::to_string(rate) + ")";
  Rng rng = stream_rng(seed, "corrupt");
  for (const std::size_t i : sample_without_replacement(rng, ds.size(), n_flip))
    out.records[i].label = 1 - out.records[i].label;
  return out;
}

// Per-record 2-vector (a, b) in confidence direction, order preserved.
inline mapper::Batch pairwise_concat(const LabeledDataset& ds,
                                     const std::string& name_a,
                                     const std::string& name_b,
                                     const Orientation& orient) {
  const auto col_a = extract_score_column(ds, name_a, orient);
  const auto col_b = extract_score_column(ds, name_b, orient);
  mapper::Batch batch;
  batch.input_dim = 2;
  batch.x.reserve(2 * col_a.size());
  batch.y.reserve(col_a.size());
  for (std::size_t i = 0; i < col_a.size(); ++i) {
    batch.x.push_back(col_a[i].first);
    batch.x.push_back(col_b[i].first);
    batch.y.push_back(col_a[i].second);
  }
  return batch;
}

inline mapper::Batch single_score_batch(const LabeledDataset& ds,
                                        const std::string& name,
                                        const Orientation& orient) {
  const auto col = extract_score_column(ds, name, orient);
  mapper::Batch batch;
  batch.input_dim = 1;
  batch.x.reserve(col.size());
  batch.y.reserve(col.size());
  for (const auto& [v, label] : col) {
    batch.x.push_back(v);
    batch.y.push_back(label);
  }
  return batch;
}

// Cross-task transfer: mapper trained wholly on the source (with its own
// internal validation split for early stopping), then applied to and
// evaluated on the target.
inline metrics::ReliabilityReport transfer_run(const LabeledDataset& train_ds,
                                               const LabeledDataset& test_ds,
                                               const std::string& score_name,
                                               const mapper::MapperConfig& cfg,
                                               const Orientation& orient,
                                               std::size_t m_bins = 10) {
  if (cfg.input_dim != 1)
    throw Error("input-dim-mismatch", "transfer_run uses a single score");
  const auto train_batch = single_score_batch(train_ds, score_name, orient);
  const auto [params, history] = mapper::train(train_batch, cfg);
  (void)history;
  const auto test_batch = single_score_batch(test_ds, score_name, orient);
  const auto probs = mapper::apply(params, test_batch.x);
  return metrics::reliability_bins(probs, test_batch.y, m_bins);
}

}  // namespace tac::supervision
