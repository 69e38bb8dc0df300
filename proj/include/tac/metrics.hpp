#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tac/error.hpp"

namespace tac::metrics {

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

// Empirical AUROC with half credit for ties, computed exactly:
//   (#{s_i > s_j : C_i=1, C_j=0} + 0.5 * #ties) / (n_pos * n_neg)
// Sort-based; bit-identical to exhaustive pair enumeration because the win
// and tie counts are integers and the final division is the same expression.
inline double auroc(const std::vector<std::pair<double, int>>& pairs) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [s, label] : pairs) {
    (void)s;
    if (label == 1)
      ++n_pos;
    else
      ++n_neg;
  }
  if (n_pos == 0 || n_neg == 0)
    throw Error("degenerate-class", "auroc needs both classes present");

  std::vector<std::pair<double, int>> sorted = pairs;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  unsigned long long wins = 0, tie_pairs = 0, neg_below = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    unsigned long long grp_pos = 0, grp_neg = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      if (sorted[j].second == 1)
        ++grp_pos;
      else
        ++grp_neg;
      ++j;
    }
    wins += grp_pos * neg_below;
    tie_pairs += grp_pos * grp_neg;
    neg_below += grp_neg;
    i = j;
  }
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(tie_pairs)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

// Index of the equal-width bin [k/M, (k+1)/M) containing p; the last bin is
// closed. The floor is corrected against the exact double edges k/M so a
// prediction sitting on an edge always lands in the mathematically right bin.
inline std::size_t bin_index(double p, std::size_t m_bins) {
  auto edge = [m_bins](std::size_t k) {
    return static_cast<double>(k) / static_cast<double>(m_bins);
  };
  auto idx = static_cast<std::size_t>(p * static_cast<double>(m_bins));
  if (idx >= m_bins) idx = m_bins - 1;
  while (idx > 0 && p < edge(idx)) --idx;
  while (idx + 1 < m_bins && p >= edge(idx + 1)) ++idx;
  return idx;
}

namespace detail {
inline void check_ece_inputs(const std::vector<double>& preds,
                             const std::vector<int>& labels,
                             std::size_t m_bins) {
  if (m_bins == 0) throw Error("bad-bin-count", "m_bins must be positive");
  if (preds.size() != labels.size())
    throw Error("length-mismatch", "preds and labels differ in length");
  if (preds.empty()) throw Error("empty-dataset", "no predictions to bin");
  for (const double p : preds)
    if (!(p >= 0.0 && p <= 1.0))
      throw Error("unnormalized-prediction",
                  "prediction " + std::to_string(p) + " outside [0,1]");
}
}  // namespace detail

// Expected calibration error over M equal-width bins:
//   sum_m (|B_m|/n) * |acc(B_m) - conf(B_m)|
// Predictions must already live in [0,1]; out-of-range values are an error,
// never clamped.
inline double ece(const std::vector<double>& preds,
                  const std::vector<int>& labels, std::size_t m_bins) {
  detail::check_ece_inputs(preds, labels, m_bins);
  const std::size_t n = preds.size();
  std::vector<std::size_t> count(m_bins, 0), correct(m_bins, 0);
  std::vector<double> conf_sum(m_bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = bin_index(preds[i], m_bins);
    ++count[b];
    correct[b] += static_cast<std::size_t>(labels[i]);
    conf_sum[b] += preds[i];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < m_bins; ++b) {
    if (count[b] == 0) continue;
    const double cnt = static_cast<double>(count[b]);
    const double acc = static_cast<double>(correct[b]) / cnt;
    const double conf = conf_sum[b] / cnt;
    total += (cnt / static_cast<double>(n)) * std::abs(acc - conf);
  }
  return total;
}

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double conf = 0.0;  // mean predicted confidence; bin midpoint when empty
  double acc = 0.0;   // empirical accuracy; 0 when empty
};

struct ReliabilityReport {
  std::vector<ReliabilityBin> bins;  // all M bins, partitioning [0,1]
  double ece = 0.0;
  double auroc = 0.0;
  std::size_t n = 0;
};

// Per-bin reliability data plus ECE and AUROC on the same inputs. The ECE
// field is recomputable from the bins exactly.
inline ReliabilityReport reliability_bins(const std::vector<double>& preds,
                                          const std::vector<int>& labels,
                                          std::size_t m_bins) {
  detail::check_ece_inputs(preds, labels, m_bins);
  const std::size_t n = preds.size();

  ReliabilityReport report;
  report.n = n;
  report.bins.resize(m_bins);
  std::vector<std::size_t> correct(m_bins, 0);
  std::vector<double> conf_sum(m_bins, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = bin_index(preds[i], m_bins);
    ++report.bins[b].count;
    correct[b] += static_cast<std::size_t>(labels[i]);
    conf_sum[b] += preds[i];
  }

  double total = 0.0;
  for (std::size_t b = 0; b < m_bins; ++b) {
    auto& bin = report.bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(m_bins);
    bin.hi = static_cast<double>(b + 1) / static_cast<double>(m_bins);
    if (bin.count > 0) {
      const double cnt = static_cast<double>(bin.count);
      bin.acc = static_cast<double>(correct[b]) / cnt;
      bin.conf = conf_sum[b] / cnt;
      total += (cnt / static_cast<double>(n)) * std::abs(bin.acc - bin.conf);
    } else {
      bin.conf = 0.5 * (bin.lo + bin.hi);
      bin.acc = 0.0;
    }
  }
  report.ece = total;

  std::vector<std::pair<double, int>> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(preds[i], labels[i]);
  report.auroc = auroc(pairs);
  return report;
}

// Min-max affine normalization onto [0,1], used to bin raw (already
// confidence-oriented) scores. A constant column maps to all 0.5.
inline std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw Error("empty-dataset", "nothing to normalize");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - lo) / (hi - lo);
  return out;
}

// ---------------------------------------------------------------------------
// Exact finite joints over (C, S)
// ---------------------------------------------------------------------------

// Finite joint distribution of a binary correctness label and a real score.
// mass[k] = {P(C=0, S=s_k), P(C=1, S=s_k)}; support strictly increasing.
struct DiscreteJoint {
  std::vector<double> support;
  std::vector<std::array<double, 2>> mass;

  void validate(double tol = 1e-12) const {
    if (support.size() != mass.size() || support.empty())
      throw Error("invalid-joint", "support and mass size mismatch or empty");
    for (std::size_t k = 1; k < support.size(); ++k)
      if (!(support[k] > support[k - 1]))
        throw Error("invalid-joint", "support not strictly increasing");
    double sum = 0.0;
    for (const auto& m : mass) {
      if (m[0] < 0.0 || m[1] < 0.0)
        throw Error("invalid-joint", "negative probability mass");
      sum += m[0] + m[1];
    }
    if (std::abs(sum - 1.0) > tol)
      throw Error("invalid-joint",
                  "mass sums to " + std::to_string(sum) + ", not 1");
  }

  double prior() const {  // P(C=1)
    double p = 0.0;
    for (const auto& m : mass) p += m[1];
    return p;
  }

  // P(S = s_k | C = c); degenerate class is an error.
  std::vector<double> conditional(int c) const {
    const double pc = prior();
    const double denom = c == 1 ? pc : 1.0 - pc;
    if (denom <= 0.0)
      throw Error("degenerate-class", "conditional on zero-mass class");
    std::vector<double> out(mass.size());
    for (std::size_t k = 0; k < mass.size(); ++k) out[k] = mass[k][c] / denom;
    return out;
  }
};

// Total variation distance between two distributions on the same support.
inline double tv_distance(const std::vector<double>& p,
                          const std::vector<double>& q) {
  if (p.size() != q.size())
    throw Error("support-mismatch", "tv_distance needs identical supports");
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += std::abs(p[k] - q[k]);
  return 0.5 * sum;
}

// Mutual information I(C;S) in nats, straight from the definition
//   sum_{c,k} p(c,s_k) ln( p(c,s_k) / (p(c) p(s_k)) ),   0 ln 0 = 0.
inline double mutual_information(const DiscreteJoint& j) {
  if (j.support.size() != j.mass.size() || j.support.empty())
    throw Error("invalid-joint", "support and mass size mismatch or empty");
  double sum = 0.0;
  for (const auto& m : j.mass) sum += m[0] + m[1];
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("invalid-joint",
                "mass sums to " + std::to_string(sum) + ", not 1");

  const double pc1 = j.prior();
  const double pc0 = 1.0 - pc1;
  double info = 0.0;
  for (std::size_t k = 0; k < j.mass.size(); ++k) {
    const double ps = j.mass[k][0] + j.mass[k][1];
    for (int c = 0; c < 2; ++c) {
      const double pcs = j.mass[k][c];
      if (pcs <= 0.0) continue;
      const double pc = c == 1 ? pc1 : pc0;
      info += pcs * std::log(pcs / (pc * ps));
    }
  }
  // Mutual information is nonnegative; an independent joint can accumulate
  // to a tiny negative value in floating point, which would NaN any later
  // sqrt. Clamp the rounding dust away.
  return info < 0.0 ? 0.0 : info;
}

// Binary entropy h(x) = -x ln x - (1-x) ln(1-x) in nats; h(0) = h(1) = 0.
inline double binary_entropy(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error("out-of-range", "binary_entropy argument outside [0,1]");
  if (lambda == 0.0 || lambda == 1.0) return 0.0;
  return -lambda * std::log(lambda) - (1.0 - lambda) * std::log(1.0 - lambda);
}

// Tie-aware AUC straight off a joint: P(S_+ > S_-) + 0.5 P(S_+ = S_-)
// with S_+ ~ P(S|C=1), S_- ~ P(S|C=0).
inline double auc_from_joint(const DiscreteJoint& j) {
  const auto p_pos = j.conditional(1);
  const auto p_neg = j.conditional(0);
  double auc = 0.0, neg_below = 0.0;
  for (std::size_t k = 0; k < p_pos.size(); ++k) {
    auc += p_pos[k] * (neg_below + 0.5 * p_neg[k]);
    neg_below += p_neg[k];
  }
  return auc;
}

struct Prop1Check {
  double lhs = 0.0;    // |AUC - 1/2|
  double rhs = 0.0;    // sqrt( I / (2 p_c (1-p_c)) )
  bool holds = false;  // lhs <= rhs + 1e-12
};

// Information bound on discriminability: |AUC - 1/2| <= sqrt(I/(2 pc (1-pc))).
inline Prop1Check prop1_bound(const DiscreteJoint& j) {
  const double pc = j.prior();
  if (!(pc > 0.0 && pc < 1.0))
    throw Error("degenerate-class", "prop1_bound needs 0 < p_c < 1");
  Prop1Check out;
  out.lhs = std::abs(auc_from_joint(j) - 0.5);
  out.rhs = std::sqrt(mutual_information(j) / (2.0 * pc * (1.0 - pc)));
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

// Shortest round-trip decimal representation; keeps emitted tables diffable.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline nlohmann::json to_json(const ReliabilityReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins)
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"conf", b.conf},
                    {"acc", b.acc}});
  return nlohmann::json{
      {"n", r.n}, {"ece", r.ece}, {"auroc", r.auroc}, {"bins", bins}};
}

// CSV of bins with header "lo,hi,count,conf,acc".
inline std::string bins_csv(const ReliabilityReport& r) {
  std::string out = "lo,hi,count,conf,acc\n";
  for (const auto& b : r.bins) {
    out += format_double(b.lo) + ',' + format_double(b.hi) + ',' +
           std::to_string(b.count) + ',' + format_double(b.conf) + ',' +
           format_double(b.acc) + '\n';
  }
  return out;
}

}  // namespace tac::metrics
