#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tac/error.hpp"

namespace tac {

// One scored observation: raw proxy value(s) plus a correctness label.
// Raw scores are unbounded reals in whatever direction the producing method
// uses; Orientation (below) settles the direction at extraction time.
struct ScoreRecord {
  std::string id;
  std::map<std::string, double> scores;
  int label = 0;  // correctness, 0 or 1
  std::optional<std::vector<double>> token_logprobs;   // natural log, <= 0
  std::optional<std::vector<double>> step_entropies;   // nats, >= 0
  std::map<std::string, std::string> meta;
};

// Ordered collection of records. `seed` is the single 64-bit source of all
// randomness derived for this dataset; protocols split it into independent
// streams (see rng.hpp). Immutable after construction by convention.
struct LabeledDataset {
  std::vector<ScoreRecord> records;
  std::string source_tag;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

enum class Direction { confidence, uncertainty };

// Per-score-name direction map. Shipped defaults cover the usual proxy
// families; anything unknown must be set explicitly before use.
class Orientation {
 public:
  static Orientation defaults() {
    Orientation o;
    for (const char* n :
         {"msp", "log_msp", "msp_log", "logprob", "log_prob", "seq_logprob",
          "vc", "verbalized_confidence", "p_true", "ptrue", "confidence",
          "tac_prob"})
      o.dirs_[n] = Direction::confidence;
    for (const char* n :
         {"entropy", "mean_entropy", "predictive_entropy", "semantic_entropy",
          "se", "perplexity", "ppl", "energy", "coe_c", "coe_r", "eigenscore"})
      o.dirs_[n] = Direction::uncertainty;
    return o;
  }

  void set(const std::string& name, Direction d) { dirs_[name] = d; }

  Direction of(const std::string& name) const {
    const auto it = dirs_.find(name);
    if (it != dirs_.end()) return it->second;
    if (const auto guessed = guess(name)) return *guessed;
    throw Error("unknown-orientation",
                "no direction configured for score '" + name + "'");
  }

 private:
  // Substring heuristic for names not in the table, e.g. "entropy_v2".
  static std::optional<Direction> guess(std::string_view name) {
    std::string low(name);
    std::transform(low.begin(), low.end(), low.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* u : {"entropy", "perplexity", "ppl", "energy", "eigen",
                          "coe", "uncert"})
      if (low.find(u) != std::string::npos) return Direction::uncertainty;
    for (const char* c : {"msp", "logprob", "log_prob", "prob", "conf",
                          "p_true", "ptrue", "vc"})
      if (low.find(c) != std::string::npos) return Direction::confidence;
    return std::nullopt;
  }

  std::map<std::string, Direction> dirs_;
};

// Fraction of label-1 records. Callers that need both classes must check the
// result against {0, 1} themselves.
inline double correctness_prior(const LabeledDataset& ds) {
  if (ds.empty()) throw Error("empty-dataset", "correctness_prior on empty dataset");
  std::size_t positives = 0;
  for (const auto& r : ds.records) positives += static_cast<std::size_t>(r.label);
  return static_cast<double>(positives) / static_cast<double>(ds.size());
}

// One score column in confidence direction (uncertainty values are negated),
// record order preserved. Missing names on any record are a contract error
// listing the offending ids.
inline std::vector<std::pair<double, int>> extract_score_column(
    const LabeledDataset& ds, const std::string& name,
    const Orientation& orient) {
  const Direction dir = orient.of(name);
  std::vector<std::pair<double, int>> out;
  out.reserve(ds.size());
  std::string missing;
  for (const auto& r : ds.records) {
    const auto it = r.scores.find(name);
    if (it == r.scores.end()) {
      if (!missing.empty()) missing += ", ";
      missing += r.id;
      continue;
    }
    const double v = dir == Direction::uncertainty ? -it->second : it->second;
    out.emplace_back(v, r.label);
  }
  if (!missing.empty())
    throw Error("missing-score",
                "score '" + name + "' absent on ids: " + missing);
  return out;
}

}  // namespace tac
