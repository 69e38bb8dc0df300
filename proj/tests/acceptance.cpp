// Acceptance gate: ten end-to-end checks, one PASS/FAIL line each, nonzero
// exit when any fail. Tolerances and time budgets are pinned here on purpose;
// loosening them is a behaviour change, not a cleanup.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fixtures.hpp"
#include "tac/tac.hpp"

namespace {

namespace m = tac::metrics;
namespace mp = tac::mapper;
namespace sv = tac::supervision;
namespace lab = tac::lab;

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) { return m::format_double(v); }

void report(int num, const std::string& what, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << num << ": " << what
            << " (" << detail << ")\n";
  if (!ok) ++failures;
}

double auroc_of(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::pair<double, int>> pairs(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    pairs[i] = {scores[i], labels[i]};
  return m::auroc(pairs);
}

// Exhaustive pair enumeration; numerator is a sum of 0.5 multiples, so it is
// exact, and the final division matches the implementation's expression.
double auroc_oracle(const std::vector<std::pair<double, int>>& pairs) {
  double n_pos = 0.0, n_neg = 0.0, num = 0.0;
  for (const auto& [s, c] : pairs) (c == 1 ? n_pos : n_neg) += 1.0;
  for (const auto& [si, ci] : pairs) {
    if (ci != 1) continue;
    for (const auto& [sj, cj] : pairs) {
      if (cj != 0) continue;
      if (si > sj)
        num += 1.0;
      else if (si == sj)
        num += 0.5;
    }
  }
  return num / (n_pos * n_neg);
}

// Direct per-bin recomputation with an independent membership test.
double ece_oracle(const std::vector<double>& preds,
                  const std::vector<int>& labels, std::size_t m_bins) {
  const double n = static_cast<double>(preds.size());
  double total = 0.0;
  for (std::size_t b = 0; b < m_bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(m_bins);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(m_bins);
    const bool last = b + 1 == m_bins;
    double cnt = 0.0, conf_sum = 0.0, correct = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double p = preds[i];
      if (!(p >= lo && (p < hi || (last && p <= hi)))) continue;
      cnt += 1.0;
      conf_sum += p;
      correct += labels[i];
    }
    if (cnt == 0.0) continue;
    total += (cnt / n) * std::abs(correct / cnt - conf_sum / cnt);
  }
  return total;
}

double loss_of(const mp::MapperParams& p, const mp::Batch& b, double phi) {
  std::vector<double> probs(b.size()), logits(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto f = mp::forward(p, b.row(i));
    probs[i] = f.prob;
    logits[i] = f.z;
  }
  return mp::total_loss(probs, logits, b.y, phi);
}

// --- criterion 1: information bounds on random joints ----------------------

void criterion_1() {
  const auto t0 = Clock::now();
  tac::Rng rng(42);
  bool ok = true;
  double min_slack_info = std::numeric_limits<double>::infinity();
  double min_slack_tv = std::numeric_limits<double>::infinity();
  const int rounds = 1000;
  for (int i = 0; i < rounds; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(15));
    const auto joint = fixtures::random_joint(rng, k);
    joint.validate();
    const auto p1 = m::prop1_bound(joint);
    const double tv = m::tv_distance(joint.conditional(1), joint.conditional(0));
    min_slack_info = std::min(min_slack_info, p1.rhs - p1.lhs);
    min_slack_tv = std::min(min_slack_tv, tv - p1.lhs);
    if (!(p1.rhs - p1.lhs >= -1e-12) || !(tv - p1.lhs >= -1e-12)) ok = false;
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 5.0;
  report(1, "discriminability bounds hold on 1000 random joints", ok,
         "min info-bound slack " + fmt(min_slack_info) + ", min TV slack " +
             fmt(min_slack_tv) + ", " + fmt(dt) + " s");
}

// --- criterion 2: vanishing-information construction -----------------------

void criterion_2() {
  const auto t0 = Clock::now();
  auto world = lab::build_base_world(50, 3, 12, 7);
  world.informative_bonus = std::log(3.0);
  bool ok = true;
  double gap_at_smallest = 1.0;
  std::string rows;
  for (const double lam : {0.5, 0.1, 0.01, 0.001}) {
    const auto r = lab::verify_prop2({lam, world});
    if (!(r.info <= r.budget + 1e-12) || !r.holds) ok = false;
    if (lam == 0.001) gap_at_smallest = r.auc_gap;
    rows += " I(" + fmt(lam) + ")=" + fmt(r.info);
  }
  const double dt = seconds_since(t0);
  ok = ok && gap_at_smallest < 0.05 && dt < 1.0;
  report(2, "mixture sweep respects the information budget", ok,
         "gap at lambda=0.001 is " + fmt(gap_at_smallest) + "," + rows + ", " +
             fmt(dt) + " s");
}

// --- criteria 3 and 4: posterior recovery and ECE reduction ----------------

void criteria_3_and_4() {
  const auto t0 = Clock::now();
  const auto train_ds = fixtures::sigmoid_posterior(5000, 101);
  const auto test_ds = fixtures::sigmoid_posterior(2000, 202);
  const auto orient = tac::Orientation::defaults();
  const auto train_batch = sv::single_score_batch(train_ds, "confidence", orient);
  const auto test_batch = sv::single_score_batch(test_ds, "confidence", orient);

  mp::MapperConfig cfg;
  cfg.phi_rank = 0.0;
  cfg.seed = 0;
  const auto [params, history] = mp::train(train_batch, cfg);
  (void)history;
  const auto probs = mp::apply(params, test_batch.x);
  const auto rep = m::reliability_bins(probs, test_batch.y, 10);

  double mae = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double truth = mp::stable_sigmoid(2.0 * test_batch.x[i] - 1.0);
    mae += std::abs(probs[i] - truth);
  }
  mae /= static_cast<double>(probs.size());
  const double dt = seconds_since(t0);

  const bool ok3 = rep.ece < 0.05 && mae < 0.05 && dt < 30.0;
  report(3, "trained mapper recovers the known posterior", ok3,
         "held-out ECE " + fmt(rep.ece) + ", mean |p-p*| " + fmt(mae) + ", " +
             fmt(dt) + " s");

  const auto vanilla = m::minmax_normalize(test_batch.x);
  const double ece_vanilla = m::reliability_bins(vanilla, test_batch.y, 10).ece;
  const bool ok4 = ece_vanilla > 0.0 && rep.ece <= 0.5 * ece_vanilla;
  report(4, "calibrated ECE is at most half the vanilla ECE", ok4,
         "vanilla " + fmt(ece_vanilla) + " vs calibrated " + fmt(rep.ece));
}

// --- criterion 5: gradient oracle -------------------------------------------

void criterion_5() {
  tac::Rng rng(4242);
  const double h = 1e-5;
  bool ok = true;
  double worst_rel = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    mp::MapperConfig cfg;
    cfg.input_dim = draw % 2 == 0 ? 1 : 2;
    cfg.hidden_width = 2 + static_cast<int>(rng.below(3));
    cfg.hidden_layers = 1 + static_cast<int>(rng.below(3));
    tac::Rng init_rng = tac::stream_rng(1000 + static_cast<std::uint64_t>(draw),
                                        "acceptance-grad");
    mp::MapperParams params = mp::init_params(cfg, init_rng);
    // Random biases keep pre-activations off the ReLU kink, where the loss is
    // not differentiable and central differences are not a valid oracle.
    for (auto& layer : params.layers)
      for (auto& b : layer.b) b = init_rng.uniform(-0.5, 0.5);

    mp::Batch batch;
    batch.input_dim = cfg.input_dim;
    const std::size_t n = 3 + static_cast<std::size_t>(rng.below(10));
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < cfg.input_dim; ++d) batch.x.push_back(rng.normal());
      batch.y.push_back(rng.uniform01() < 0.5 ? 1 : 0);
    }
    batch.y[0] = 1;  // both classes present
    batch.y[1] = 0;
    const double phi = draw % 2 == 0 ? 0.0 : 1.0;

    const auto analytic = mp::gradients(params, batch, phi);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto walk = [&](std::vector<double> mp::Layer::* member,
                      const std::vector<double>& grad_vec) {
        auto& vec = params.layers[l].*member;
        for (std::size_t i = 0; i < vec.size(); ++i) {
          const double keep = vec[i];
          vec[i] = keep + h;
          const double up = loss_of(params, batch, phi);
          vec[i] = keep - h;
          const double down = loss_of(params, batch, phi);
          vec[i] = keep;
          const double fd = (up - down) / (2.0 * h);
          const double ga = grad_vec[i];
          const double err = std::abs(ga - fd);
          const double scale = std::max(std::abs(ga), std::abs(fd));
          if (scale > 1e-7) worst_rel = std::max(worst_rel, err / scale);
          if (!(err <= 1e-4 * scale || err <= 1e-7)) ok = false;
        }
      };
      walk(&mp::Layer::w, analytic.layers[l].w);
      walk(&mp::Layer::b, analytic.layers[l].b);
    }
  }
  report(5, "analytic gradients match central finite differences", ok,
         "20 draws, h=1e-5, worst relative error " + fmt(worst_rel));
}

// --- criterion 6: metric oracles --------------------------------------------

void criterion_6() {
  tac::Rng rng(606);
  bool ok = true;
  int auroc_exact = 0, ece_exact = 0;
  const int rounds = 100;
  for (int round = 0; round < rounds; ++round) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(199));
    std::vector<std::pair<double, int>> pairs(n);
    std::vector<double> preds(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Alternate a tie-heavy grid with continuous draws.
      const double p = round % 2 == 0
                           ? static_cast<double>(rng.below(11)) / 10.0
                           : rng.uniform01();
      const int y = rng.uniform01() < 0.5 ? 1 : 0;
      preds[i] = p;
      labels[i] = y;
      pairs[i] = {p, y};
    }
    labels[0] = pairs[0].second = 1;
    labels[n - 1] = pairs[n - 1].second = 0;

    if (m::auroc(pairs) == auroc_oracle(pairs)) ++auroc_exact;
    if (m::ece(preds, labels, 10) == ece_oracle(preds, labels, 10)) ++ece_exact;
  }
  ok = auroc_exact == rounds && ece_exact == rounds;
  report(6, "AUROC and ECE equal brute-force oracles bit-for-bit", ok,
         std::to_string(auroc_exact) + "/100 AUROC, " +
             std::to_string(ece_exact) + "/100 ECE exact");
}

// --- criterion 7: protocol exactness ----------------------------------------

void criterion_7() {
  const auto ds = fixtures::sigmoid_posterior(200, 55);
  bool ok = true;
  std::string detail;

  for (const double rate : {0.0, 0.1, 0.25, 0.33, 0.5, 1.0}) {
    const auto noisy = sv::corrupt_labels(ds, rate, 99);
    const auto again = sv::corrupt_labels(ds, rate, 99);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (noisy.records[i].label != ds.records[i].label) ++flips;
      if (noisy.records[i].label != again.records[i].label) ok = false;
    }
    const auto want = static_cast<std::size_t>(
        std::floor(rate * static_cast<double>(ds.size())));
    if (flips != want) ok = false;
  }
  detail += "flip counts exact for 6 rates";

  const auto sub = sv::fewshot_subsample(ds, 16, 99);
  const auto sub2 = sv::fewshot_subsample(ds, 16, 99);
  if (sub.size() != 16 || sub2.size() != 16) ok = false;
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    (sub.records[i].label == 1 ? has_pos : has_neg) = true;
    if (sub.records[i].id != sub2.records[i].id) ok = false;
  }
  if (!has_pos || !has_neg) ok = false;
  detail += "; k=16 subsample reproducible with both classes";

  report(7, "label corruption and few-shot subsampling are exact", ok, detail);
}

// --- criterion 8: ranking loss changes the learned ordering -----------------

void criterion_8() {
  const auto train_ds = fixtures::nonmonotone_posterior(1200, 303);
  const auto eval_ds = fixtures::nonmonotone_posterior(800, 304);
  const auto orient = tac::Orientation::defaults();
  const auto train_batch = sv::single_score_batch(train_ds, "confidence", orient);
  const auto eval_batch = sv::single_score_batch(eval_ds, "confidence", orient);

  auto run = [&](double phi) {
    mp::MapperConfig cfg;
    cfg.phi_rank = phi;
    cfg.seed = 11;
    const auto [params, history] = mp::train(train_batch, cfg);
    (void)history;
    return auroc_of(mp::apply(params, eval_batch.x), eval_batch.y);
  };
  const double without_rank = run(0.0);
  const double with_rank = run(1.0);
  report(8, "the ranking term changes the learned ordering",
         without_rank != with_rank,
         "AUROC " + fmt(without_rank) + " without vs " + fmt(with_rank) +
             " with ranking");
}

// --- criterion 9: pairwise mapper recovers XOR structure --------------------

void criterion_9() {
  const auto t0 = Clock::now();
  const auto train_ds = fixtures::xor_bands(1500, 77);
  const auto eval_ds = fixtures::xor_bands(1500, 78);
  auto orient = tac::Orientation::defaults();
  orient.set("score_a", tac::Direction::confidence);
  orient.set("score_b", tac::Direction::confidence);

  mp::MapperConfig cfg2;
  cfg2.input_dim = 2;
  cfg2.seed = 0;
  const auto [p2, h2] =
      mp::train(sv::pairwise_concat(train_ds, "score_a", "score_b", orient), cfg2);
  (void)h2;
  const auto eval2 = sv::pairwise_concat(eval_ds, "score_a", "score_b", orient);
  const double auroc_2d = auroc_of(mp::apply(p2, eval2.x), eval2.y);

  auto one_dim = [&](const std::string& name) {
    mp::MapperConfig cfg1;
    cfg1.seed = 0;
    const auto [p1, h1] =
        mp::train(sv::single_score_batch(train_ds, name, orient), cfg1);
    (void)h1;
    const auto ev = sv::single_score_batch(eval_ds, name, orient);
    return auroc_of(mp::apply(p1, ev.x), ev.y);
  };
  const double auroc_a = one_dim("score_a");
  const double auroc_b = one_dim("score_b");
  const double dt = seconds_since(t0);

  const bool ok = auroc_2d > 0.9 && auroc_a < 0.6 && auroc_b < 0.6 && dt < 60.0;
  report(9, "two scores jointly discriminate where each alone cannot", ok,
         "2-D AUROC " + fmt(auroc_2d) + ", 1-D " + fmt(auroc_a) + " / " +
             fmt(auroc_b) + ", " + fmt(dt) + " s");
}

// --- criterion 10: transfer mechanics ----------------------------------------

void criterion_10() {
  const auto src = fixtures::sigmoid_posterior(5000, 1);
  const auto dst = fixtures::sigmoid_posterior(5000, 2);
  mp::MapperConfig cfg;
  cfg.phi_rank = 0.0;
  cfg.seed = 0;
  const auto orient = tac::Orientation::defaults();
  const auto rep = sv::transfer_run(src, dst, "confidence", cfg, orient, 10);
  const auto rep_again = sv::transfer_run(src, dst, "confidence", cfg, orient, 10);
  const bool ok = rep.ece < 0.05 && rep.ece == rep_again.ece &&
                  rep.auroc == rep_again.auroc;
  report(10, "shared-posterior transfer calibrates the target deterministically",
         ok, "target ECE " + fmt(rep.ece) + ", AUROC " + fmt(rep.auroc));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criteria_3_and_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();

  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 10 criteria passed\n";
  return 0;
}
