#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tac/error.hpp"
#include "tac/metrics.hpp"
#include "tac/rng.hpp"

namespace tac::lab {

inline constexpr double kLn2 = 0.6931471805599453;
inline constexpr std::size_t kMaxJointSupport = 10000;

// One query in the two-response construction: the correct and the wrong
// response share this base entropy profile, which is zero everywhere except
// ln 2 at the single divergence position tau (1-based).
struct QueryProfile {
  int length = 1;
  int tau = 1;
  std::vector<double> base_profile;
};

// A collection of two-response queries. Under the base component both
// responses are equiprobable, so the correctness prior is 1/2 and the
// entropy proxy carries no information. The informative component appends
// one extra entropy step of `informative_bonus` to every wrong response.
struct TwoResponseWorld {
  std::vector<QueryProfile> queries;
  double informative_bonus = 0.0;
  std::uint64_t seed = 0;
};

// Convex mixture weight lambda on the informative component.
struct MixtureSpec {
  double lambda = 0.0;
  TwoResponseWorld world;
};

enum class Aggregation { sum, mean };

// Aggregate per-step entropies into the scalar proxy value.
inline double predictive_entropy(const std::vector<double>& profile,
                                 Aggregation mode = Aggregation::sum) {
  if (profile.empty()) throw Error("empty-profile", "no entropy steps");
  double total = 0.0;
  for (const double h : profile) {
    if (h < 0.0) throw Error("negative-entropy", "entropy steps must be >= 0");
    total += h;
  }
  return mode == Aggregation::sum
             ? total
             : total / static_cast<double>(profile.size());
}

inline TwoResponseWorld build_base_world(std::size_t n_queries, int len_lo,
                                         int len_hi, std::uint64_t seed) {
  if (n_queries == 0) throw Error("empty-world", "need at least one query");
  if (len_lo < 1 || len_hi < len_lo)
    throw Error("out-of-range", "invalid length range");
  TwoResponseWorld world;
  world.seed = seed;
  world.queries.reserve(n_queries);
  Rng rng = stream_rng(seed, "world");
  for (std::size_t q = 0; q < n_queries; ++q) {
    QueryProfile qp;
    qp.length = len_lo + static_cast<int>(rng.below(
                             static_cast<std::uint64_t>(len_hi - len_lo + 1)));
    qp.tau = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(qp.length)));
    qp.base_profile.assign(static_cast<std::size_t>(qp.length), 0.0);
    qp.base_profile[static_cast<std::size_t>(qp.tau - 1)] = kLn2;
    world.queries.push_back(std::move(qp));
  }
  return world;
}

namespace detail {

using MassMap = std::map<double, std::array<double, 2>>;

inline void add_mass(MassMap& m, double s, int c, double w) {
  auto [it, inserted] = m.try_emplace(s, std::array<double, 2>{0.0, 0.0});
  (void)inserted;
  it->second[c] += w;
}

inline metrics::DiscreteJoint to_joint(const MassMap& m) {
  if (m.size() > kMaxJointSupport)
    throw Error("support-overflow",
                "joint support larger than " + std::to_string(kMaxJointSupport));
  metrics::DiscreteJoint j;
  j.support.reserve(m.size());
  j.mass.reserve(m.size());
  for (const auto& [s, mass] : m) {
    j.support.push_back(s);
    j.mass.push_back(mass);
  }
  return j;
}

inline MassMap base_mass(const TwoResponseWorld& world, Aggregation agg) {
  if (world.queries.empty()) throw Error("empty-world", "world has no queries");
  MassMap m;
  const double w = 0.5 / static_cast<double>(world.queries.size());
  for (const auto& q : world.queries) {
    const double s0 = predictive_entropy(q.base_profile, agg);
    add_mass(m, s0, 0, w);  // wrong response, same proxy value
    add_mass(m, s0, 1, w);  // correct response
  }
  return m;
}

inline MassMap informative_mass(const TwoResponseWorld& world, Aggregation agg) {
  if (world.queries.empty()) throw Error("empty-world", "world has no queries");
  if (world.informative_bonus < 0.0)
    throw Error("out-of-range", "informative_bonus must be >= 0");
  MassMap m;
  const double w = 0.5 / static_cast<double>(world.queries.size());
  for (const auto& q : world.queries) {
    std::vector<double> wrong = q.base_profile;
    wrong.push_back(world.informative_bonus);
    add_mass(m, predictive_entropy(wrong, agg), 0, w);
    add_mass(m, predictive_entropy(q.base_profile, agg), 1, w);
  }
  return m;
}

}  // namespace detail

// Joint over (C, S_pe) under the zero-information base component.
inline metrics::DiscreteJoint base_joint(const TwoResponseWorld& world,
                                         Aggregation agg = Aggregation::sum) {
  return detail::to_joint(detail::base_mass(world, agg));
}

// Joint under the informative component: wrong responses carry one extra
// entropy step, so the proxy separates the classes whenever the bonus is
// positive.
inline metrics::DiscreteJoint informative_joint(
    const TwoResponseWorld& world, Aggregation agg = Aggregation::sum) {
  return detail::to_joint(detail::informative_mass(world, agg));
}

// Exact convex combination (1-lambda) * base + lambda * informative on the
// union support.
inline metrics::DiscreteJoint mixture_joint(const MixtureSpec& spec,
                                            Aggregation agg = Aggregation::sum) {
  if (!(spec.lambda >= 0.0 && spec.lambda <= 1.0))
    throw Error("out-of-range", "lambda outside [0,1]");
  detail::MassMap mix;
  for (const auto& [s, mass] : detail::base_mass(spec.world, agg)) {
    detail::add_mass(mix, s, 0, (1.0 - spec.lambda) * mass[0]);
    detail::add_mass(mix, s, 1, (1.0 - spec.lambda) * mass[1]);
  }
  for (const auto& [s, mass] : detail::informative_mass(spec.world, agg)) {
    detail::add_mass(mix, s, 0, spec.lambda * mass[0]);
    detail::add_mass(mix, s, 1, spec.lambda * mass[1]);
  }
  return detail::to_joint(mix);
}

struct Prop2Result {
  double lambda = 0.0;
  double info = 0.0;       // I(C; S_pe) under the mixture, nats
  double budget = 0.0;     // h(lambda) + lambda ln 2
  double auc_gap = 0.0;    // |AUC - 1/2|
  double auc_bound = 0.0;  // sqrt( I / (2 p_c (1-p_c)) )
  bool holds = false;
};

// Checks both halves of the vanishing-information argument on the exact
// mixture joint: the information budget and the induced AUC gap bound.
inline Prop2Result verify_prop2(const MixtureSpec& spec,
                                Aggregation agg = Aggregation::sum) {
  const auto joint = mixture_joint(spec, agg);
  joint.validate();
  const double pc = joint.prior();
  if (!(pc > 0.0 && pc < 1.0))
    throw Error("degenerate-class", "mixture prior degenerate");
  Prop2Result r;
  r.lambda = spec.lambda;
  r.info = metrics::mutual_information(joint);
  r.budget = metrics::binary_entropy(spec.lambda) + spec.lambda * kLn2;
  r.auc_gap = std::abs(metrics::auc_from_joint(joint) - 0.5);
  r.auc_bound = std::sqrt(r.info / (2.0 * pc * (1.0 - pc)));
  r.holds = r.info <= r.budget + 1e-12 && r.auc_gap <= r.auc_bound + 1e-12;
  return r;
}

// Bound-verification sweep as CSV: lambda,info,budget,auc_gap,auc_bound,holds.
inline std::string sweep_csv(const TwoResponseWorld& world,
                             const std::vector<double>& lambdas,
                             Aggregation agg = Aggregation::sum) {
  std::string out = "lambda,info,budget,auc_gap,auc_bound,holds\n";
  for (const double lambda : lambdas) {
    const auto r = verify_prop2(MixtureSpec{lambda, world}, agg);
    out += metrics::format_double(r.lambda) + ',' +
           metrics::format_double(r.info) + ',' +
           metrics::format_double(r.budget) + ',' +
           metrics::format_double(r.auc_gap) + ',' +
           metrics::format_double(r.auc_bound) + ',' +
           (r.holds ? "true" : "false") + '\n';
  }
  return out;
}

}  // namespace tac::lab
