#pragma once

// Deterministic synthetic fixtures shared by the unit and acceptance suites.
// Every generator is a pure function of its seed.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tac/tac.hpp"

namespace fixtures {

inline tac::ScoreRecord make_record(std::string id, double value, int label,
                                    const std::string& score_name) {
  tac::ScoreRecord rec;
  rec.id = std::move(id);
  rec.scores[score_name] = value;
  rec.label = label;
  return rec;
}

// Correctness drawn from P(C=1|s) = sigmoid(2s - 1), s ~ Uniform(-2, 2).
// The Bayes posterior is known in closed form, which makes calibration
// quality directly checkable.
inline tac::LabeledDataset sigmoid_posterior(std::size_t n, std::uint64_t seed,
                                             const std::string& score_name = "confidence") {
  tac::Rng rng = tac::stream_rng(seed, "fixture-sigmoid");
  tac::LabeledDataset ds;
  ds.source_tag = "sigmoid-posterior";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(-2.0, 2.0);
    const double p = tac::mapper::stable_sigmoid(2.0 * s - 1.0);
    ds.records.push_back(make_record("q" + std::to_string(i), s,
                                     rng.uniform01() < p ? 1 : 0, score_name));
  }
  return ds;
}

// Same marginal over s, but the posterior is flipped: high score now means
// likely wrong. Used for the adversarial transfer check.
inline tac::LabeledDataset inverted_posterior(std::size_t n, std::uint64_t seed,
                                              const std::string& score_name = "confidence") {
  tac::Rng rng = tac::stream_rng(seed, "fixture-inverted");
  tac::LabeledDataset ds;
  ds.source_tag = "inverted-posterior";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(-2.0, 2.0);
    const double p = tac::mapper::stable_sigmoid(-(2.0 * s - 1.0));
    ds.records.push_back(make_record("q" + std::to_string(i), s,
                                     rng.uniform01() < p ? 1 : 0, score_name));
  }
  return ds;
}

// V-shaped posterior P(C=1|s) = sigmoid(4(|s| - 1)): non-monotone in s, so a
// ranking objective and a pure proper-scoring objective pull differently.
inline tac::LabeledDataset nonmonotone_posterior(std::size_t n, std::uint64_t seed,
                                                 const std::string& score_name = "confidence") {
  tac::Rng rng = tac::stream_rng(seed, "fixture-vshape");
  tac::LabeledDataset ds;
  ds.source_tag = "nonmonotone-posterior";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(-2.0, 2.0);
    const double p = tac::mapper::stable_sigmoid(4.0 * (std::abs(s) - 1.0));
    ds.records.push_back(make_record("q" + std::to_string(i), s,
                                     rng.uniform01() < p ? 1 : 0, score_name));
  }
  return ds;
}

// Two scores, each marginally chance-level, jointly determining the label:
// C = 1 iff a*b > 0 (XOR-style sign bands, margin keeps points off the axes).
inline tac::LabeledDataset xor_bands(std::size_t n, std::uint64_t seed,
                                     double margin = 0.1) {
  tac::Rng rng = tac::stream_rng(seed, "fixture-xor");
  tac::LabeledDataset ds;
  ds.source_tag = "xor-bands";
  ds.seed = seed;
  auto draw = [&] {
    double v = 0.0;
    do {
      v = rng.uniform(-1.0, 1.0);
    } while (std::abs(v) < margin);
    return v;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double a = draw();
    const double b = draw();
    tac::ScoreRecord rec;
    rec.id = "q" + std::to_string(i);
    rec.scores["score_a"] = a;
    rec.scores["score_b"] = b;
    rec.label = a * b > 0.0 ? 1 : 0;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// Perfectly separable by score sign: AUROC is exactly 1.
inline tac::LabeledDataset separable(std::size_t n, std::uint64_t seed,
                                     const std::string& score_name = "confidence") {
  tac::Rng rng = tac::stream_rng(seed, "fixture-separable");
  tac::LabeledDataset ds;
  ds.source_tag = "separable";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.uniform01() < 0.5 ? 1 : 0;
    const double s = label == 1 ? rng.uniform(0.5, 1.5) : rng.uniform(-1.5, -0.5);
    ds.records.push_back(make_record("q" + std::to_string(i), s, label, score_name));
  }
  return ds;
}

// Score independent of the label: every metric should sit at chance.
inline tac::LabeledDataset coin_flip(std::size_t n, std::uint64_t seed,
                                     const std::string& score_name = "confidence") {
  tac::Rng rng = tac::stream_rng(seed, "fixture-coin");
  tac::LabeledDataset ds;
  ds.source_tag = "coin-flip";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i)
    ds.records.push_back(make_record("q" + std::to_string(i), rng.uniform01(),
                                     rng.uniform01() < 0.5 ? 1 : 0, score_name));
  return ds;
}

// (score, label) pairs with deliberate ties: scores snap to an 11-point grid.
// Guarantees both classes appear.
inline std::vector<std::pair<double, int>> tied_pairs(tac::Rng& rng, std::size_t n) {
  std::vector<std::pair<double, int>> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(rng.below(11)) / 10.0;
    pairs.emplace_back(s, rng.uniform01() < 0.5 ? 1 : 0);
  }
  pairs[0].second = 1;
  pairs[n - 1].second = 0;
  return pairs;
}

// Random joint over (C, S) with Dirichlet(1,...,1) mass: normalized
// exponential draws across all 2k cells.
inline tac::metrics::DiscreteJoint random_joint(tac::Rng& rng, std::size_t support_size) {
  tac::metrics::DiscreteJoint joint;
  joint.support.resize(support_size);
  joint.mass.resize(support_size);
  double s = -1.0;
  for (std::size_t k = 0; k < support_size; ++k) {
    s += rng.uniform(0.1, 1.0);  // strictly increasing support points
    joint.support[k] = s;
  }
  double total = 0.0;
  for (auto& cell : joint.mass)
    for (double& w : cell) {
      w = -std::log(rng.uniform01());  // Exp(1) draw
      total += w;
    }
  for (auto& cell : joint.mass)
    for (double& w : cell) w /= total;
  return joint;
}

}  // namespace fixtures
