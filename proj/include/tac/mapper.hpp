#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tac/error.hpp"
#include "tac/metrics.hpp"
#include "tac/rng.hpp"

namespace tac::mapper {

// Training configuration. Defaults are the reference setup: width-32 MLP
// with three ReLU hidden layers, Adam at 0.01, rank weight 1, early stopping
// on validation AUROC.
struct MapperConfig {
  int input_dim = 1;  // 1 for a single score, 2 for the pairwise variant
  int hidden_width = 32;
  int hidden_layers = 3;
  double learning_rate = 0.01;
  double phi_rank = 1.0;
  int max_epochs = 500;
  int patience = 50;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

// One affine layer, y = W x + b, with W row-major (out_dim x in_dim).
// Doubles as the container for gradients and Adam moments.
struct Layer {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> w;
  std::vector<double> b;

  static Layer zeros(std::size_t out, std::size_t in) {
    return Layer{out, in, std::vector<double>(out * in, 0.0),
                 std::vector<double>(out, 0.0)};
  }
};

// Trained mapper: layer stack plus the input standardization constants, so
// that apply() is self-contained.
struct MapperParams {
  int input_dim = 1;
  std::vector<Layer> layers;          // hidden_layers + 1 entries, last is 1-row
  std::vector<double> x_mean, x_std;  // per input dimension

  bool finite() const {
    for (const auto& l : layers) {
      for (const double v : l.w)
        if (!std::isfinite(v)) return false;
      for (const double v : l.b)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

// Full-batch sample container; x is row-major n x input_dim.
struct Batch {
  int input_dim = 1;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(input_dim),
            static_cast<std::size_t>(input_dim)};
  }
};

inline MapperParams zero_params(const MapperConfig& cfg) {
  MapperParams p;
  p.input_dim = cfg.input_dim;
  std::size_t in = static_cast<std::size_t>(cfg.input_dim);
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    p.layers.push_back(Layer::zeros(static_cast<std::size_t>(cfg.hidden_width), in));
    in = static_cast<std::size_t>(cfg.hidden_width);
  }
  p.layers.push_back(Layer::zeros(1, in));
  p.x_mean.assign(static_cast<std::size_t>(cfg.input_dim), 0.0);
  p.x_std.assign(static_cast<std::size_t>(cfg.input_dim), 1.0);
  return p;
}

// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases.
inline MapperParams init_params(const MapperConfig& cfg, Rng& rng) {
  MapperParams p = zero_params(cfg);
  for (auto& layer : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim));
    for (auto& w : layer.w) w = rng.uniform(-bound, bound);
  }
  return p;
}

inline double stable_sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double t) {  // log(1 + e^t), stable for large |t|
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

struct ForwardResult {
  double z = 0.0;     // pre-sigmoid logit
  double prob = 0.5;  // sigmoid(z)
};

namespace detail {

// Activations for one example; acts[0] is the standardized input, acts[l+1]
// the l-th hidden layer output. Needed for backprop.
struct Trace {
  std::vector<std::vector<double>> acts;
  double z = 0.0;
};

inline Trace forward_trace(const MapperParams& p, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(p.input_dim))
    throw Error("input-dim-mismatch",
                "expected " + std::to_string(p.input_dim) + " inputs, got " +
                    std::to_string(x.size()));
  Trace t;
  t.acts.reserve(p.layers.size());
  std::vector<double> cur(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (!std::isfinite(x[d]))
      throw Error("non-finite-input", "score vector contains NaN/Inf");
    cur[d] = (x[d] - p.x_mean[d]) / p.x_std[d];
  }
  t.acts.push_back(cur);

  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    std::vector<double> next(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      double acc = layer.b[r];
      const double* wrow = layer.w.data() + r * layer.in_dim;
      for (std::size_t c = 0; c < layer.in_dim; ++c) acc += wrow[c] * cur[c];
      next[r] = acc > 0.0 ? acc : 0.0;  // ReLU, subgradient 0 at 0
    }
    cur = std::move(next);
    t.acts.push_back(cur);
  }

  const Layer& head = p.layers.back();
  double z = head.b[0];
  for (std::size_t c = 0; c < head.in_dim; ++c) z += head.w[c] * cur[c];
  t.z = z;
  return t;
}

}  // namespace detail

// Single forward pass: logit and calibrated probability.
inline ForwardResult forward(const MapperParams& p, std::span<const double> x) {
  const auto t = detail::forward_trace(p, x);
  return ForwardResult{t.z, stable_sigmoid(t.z)};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean binary cross-entropy from probabilities (callers that have logits
// should prefer bce_from_logits).
inline double bce_loss(const std::vector<double>& probs,
                       const std::vector<int>& labels) {
  if (probs.size() != labels.size())
    throw Error("length-mismatch", "probs and labels differ in length");
  if (probs.empty()) throw Error("empty-batch", "bce_loss on empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    total -= labels[i] == 1 ? std::log(probs[i]) : std::log(1.0 - probs[i]);
  }
  return total / static_cast<double>(probs.size());
}

// Same loss computed in the numerically safe log-sum-exp form:
//   softplus(z) - C z
inline double bce_from_logits(const std::vector<double>& logits,
                              const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw Error("length-mismatch", "logits and labels differ in length");
  if (logits.empty()) throw Error("empty-batch", "bce_from_logits on empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    total += softplus(logits[i]) - static_cast<double>(labels[i]) * logits[i];
  return total / static_cast<double>(logits.size());
}

struct RankLossResult {
  double value = 0.0;
  bool no_pairs = false;  // single-class batch: loss defined as 0
};

// Pairwise logistic ranking loss over all positive-negative pairs:
//   (1/|P|) sum_{(i,j) in P} log(1 + exp(-(z_i - z_j)))
inline RankLossResult rank_loss(const std::vector<double>& logits,
                                const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw Error("length-mismatch", "logits and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < logits.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(logits[i]);
  if (pos.empty() || neg.empty()) return {0.0, true};
  double total = 0.0;
  for (const double zp : pos)
    for (const double zn : neg) total += softplus(-(zp - zn));
  return {total / (static_cast<double>(pos.size()) * static_cast<double>(neg.size())),
          false};
}

// Combined objective: L_BCE + phi_rank * L_rank. A zero rank weight skips
// the O(n^2) pair sweep entirely, keeping pure-BCE training linear in the
// batch; the result is identical since the term contributes exactly 0.
inline double total_loss(const std::vector<double>& probs,
                         const std::vector<double>& logits,
                         const std::vector<int>& labels, double phi_rank) {
  const double bce = bce_loss(probs, labels);
  if (phi_rank == 0.0) return bce;
  return bce + phi_rank * rank_loss(logits, labels).value;
}

// ---------------------------------------------------------------------------
// Gradients and Adam
// ---------------------------------------------------------------------------

struct Gradients {
  std::vector<Layer> layers;  // same shapes as MapperParams::layers
};

inline Gradients zero_gradients(const MapperParams& p) {
  Gradients g;
  for (const auto& l : p.layers) g.layers.push_back(Layer::zeros(l.out_dim, l.in_dim));
  return g;
}

// Analytic gradient of the combined objective over a full batch. The BCE term
// contributes (sigmoid(z_i) - C_i)/n at each logit; each ranking pair (i,j)
// contributes -+ phi/|P| * sigmoid(z_j - z_i).
inline Gradients gradients(const MapperParams& p, const Batch& batch,
                           double phi_rank) {
  const std::size_t n = batch.size();
  if (n == 0) throw Error("empty-batch", "gradients on empty batch");
  if (batch.input_dim != p.input_dim)
    throw Error("input-dim-mismatch", "batch and params disagree on input_dim");

  std::vector<detail::Trace> traces;
  traces.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    traces.push_back(detail::forward_trace(p, batch.row(i)));

  // dL/dz per example.
  std::vector<double> dz(n);
  for (std::size_t i = 0; i < n; ++i)
    dz[i] = (stable_sigmoid(traces[i].z) - static_cast<double>(batch.y[i])) /
            static_cast<double>(n);

  if (phi_rank != 0.0) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (batch.y[i] == 1 ? pos : neg).push_back(i);
    if (!pos.empty() && !neg.empty()) {
      const double scale =
          phi_rank / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
      for (const std::size_t i : pos) {
        for (const std::size_t j : neg) {
          const double g = stable_sigmoid(traces[j].z - traces[i].z);
          dz[i] -= scale * g;
          dz[j] += scale * g;
        }
      }
    }
  }

  Gradients grads = zero_gradients(p);
  const std::size_t n_layers = p.layers.size();
  std::vector<double> delta, prev_delta;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& trace = traces[i];
    delta.assign(1, dz[i]);
    for (std::size_t l = n_layers; l-- > 0;) {
      const Layer& layer = p.layers[l];
      Layer& grad = grads.layers[l];
      const auto& input = trace.acts[l];
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        grad.b[r] += d;
        double* grow = grad.w.data() + r * layer.in_dim;
        for (std::size_t c = 0; c < layer.in_dim; ++c) grow[c] += d * input[c];
      }
      if (l == 0) break;
      prev_delta.assign(layer.in_dim, 0.0);
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* wrow = layer.w.data() + r * layer.in_dim;
        for (std::size_t c = 0; c < layer.in_dim; ++c) prev_delta[c] += d * wrow[c];
      }
      // ReLU mask: activation 0 (including at the kink) passes nothing back.
      for (std::size_t c = 0; c < layer.in_dim; ++c)
        if (input[c] <= 0.0) prev_delta[c] = 0.0;
      delta = prev_delta;
    }
  }
  return grads;
}

struct AdamState {
  long long t = 0;
  std::vector<Layer> m, v;
};

inline AdamState make_adam_state(const MapperParams& p) {
  AdamState s;
  for (const auto& l : p.layers) {
    s.m.push_back(Layer::zeros(l.out_dim, l.in_dim));
    s.v.push_back(Layer::zeros(l.out_dim, l.in_dim));
  }
  return s;
}

// One Adam update in place, beta1=0.9, beta2=0.999, eps=1e-8, with the
// standard bias correction.
inline void adam_step(MapperParams& p, const Gradients& g, AdamState& s,
                      double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (s.m.size() != p.layers.size())
    throw Error("state-mismatch", "adam state does not match params");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t k = 0; k < param.size(); ++k) {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        param[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    };
    update(p.layers[l].w, g.layers[l].w, s.m[l].w, s.v[l].w);
    update(p.layers[l].b, g.layers[l].b, s.m[l].b, s.v[l].b);
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainHistory {
  std::vector<double> train_loss;  // one entry per completed epoch
  std::vector<double> val_auroc;
  std::size_t best_epoch = 0;  // index into the vectors above
  bool stopped_early = false;
};

// Elementwise forward over a flat row-major input block.
inline std::vector<double> apply(const MapperParams& p,
                                 const std::vector<double>& xs) {
  const auto dim = static_cast<std::size_t>(p.input_dim);
  if (xs.size() % dim != 0)
    throw Error("input-dim-mismatch", "flat input not a multiple of input_dim");
  const std::size_t n = xs.size() / dim;
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i)
    probs[i] = forward(p, {xs.data() + i * dim, dim}).prob;
  return probs;
}

namespace detail {

// Stratified split: per class, a seeded shuffle puts round(frac * n_c)
// records (clamped to [1, n_c-1]) into validation. Each class therefore
// appears in both splits, which needs n_c >= 2.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& y, double frac, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < 2 || neg.size() < 2)
    throw Error("split-degenerate",
                "need at least two records of each class to stratify "
                "(have " + std::to_string(pos.size()) + " positive, " +
                    std::to_string(neg.size()) + " negative)");

  Rng rng = stream_rng(seed, "mapper-split");
  std::vector<std::size_t> train_idx, val_idx;
  for (auto* cls : {&pos, &neg}) {
    auto& idx = *cls;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    auto n_val = static_cast<std::size_t>(
        std::llround(frac * static_cast<double>(idx.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {train_idx, val_idx};
}

inline Batch subset(const Batch& b, const std::vector<std::size_t>& idx) {
  Batch out;
  out.input_dim = b.input_dim;
  out.y.reserve(idx.size());
  out.x.reserve(idx.size() * static_cast<std::size_t>(b.input_dim));
  for (const std::size_t i : idx) {
    const auto row = b.row(i);
    out.x.insert(out.x.end(), row.begin(), row.end());
    out.y.push_back(b.y[i]);
  }
  return out;
}

}  // namespace detail

// Full-batch Adam training with early stopping on validation AUROC. Returns
// the parameter snapshot from the best epoch. Deterministic in (batch, cfg).
inline std::pair<MapperParams, TrainHistory> train(const Batch& batch,
                                                   const MapperConfig& cfg) {
  if (batch.size() < 2) throw Error("empty-batch", "need at least 2 records");
  if (batch.input_dim != cfg.input_dim)
    throw Error("input-dim-mismatch", "batch and config disagree on input_dim");

  const auto [train_idx, val_idx] =
      detail::stratified_split(batch.y, cfg.val_fraction, cfg.seed);
  const Batch train_set = detail::subset(batch, train_idx);
  const Batch val_set = detail::subset(batch, val_idx);

  Rng init_rng = stream_rng(cfg.seed, "mapper-init");
  MapperParams params = init_params(cfg, init_rng);

  // Standardize by the training split only; constants live on the params.
  const auto dim = static_cast<std::size_t>(cfg.input_dim);
  const auto n_train = static_cast<double>(train_set.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < train_set.size(); ++i) mean += train_set.x[i * dim + d];
    mean /= n_train;
    double var = 0.0;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      const double c = train_set.x[i * dim + d] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / n_train);
    params.x_mean[d] = mean;
    params.x_std[d] = sd > 0.0 ? sd : 1.0;
  }

  AdamState adam = make_adam_state(params);
  TrainHistory history;
  MapperParams best = params;
  double best_auroc = -std::numeric_limits<double>::infinity();
  double prev_auroc = -std::numeric_limits<double>::infinity();
  int stale = 0;

  std::vector<std::pair<double, int>> val_pairs(val_set.size());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const Gradients grads = gradients(params, train_set, cfg.phi_rank);
    adam_step(params, grads, adam, cfg.learning_rate);
    if (!params.finite())
      throw Error("non-finite-params", "training diverged to NaN/Inf");

    std::vector<double> logits(train_set.size()), probs(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      const auto f = forward(params, train_set.row(i));
      logits[i] = f.z;
      probs[i] = f.prob;
    }
    history.train_loss.push_back(
        total_loss(probs, logits, train_set.y, cfg.phi_rank));

    for (std::size_t i = 0; i < val_set.size(); ++i)
      val_pairs[i] = {forward(params, val_set.row(i)).prob, val_set.y[i]};
    const double va = metrics::auroc(val_pairs);
    history.val_auroc.push_back(va);

    // The snapshot tracks the maximum validation AUROC; among epochs tying
    // the maximum we keep the most-trained one, which matters when AUROC
    // saturates long before the probabilities are calibrated.
    if (va >= best_auroc) {
      best_auroc = va;
      best = params;
      history.best_epoch = history.val_auroc.size() - 1;
    }
    // Patience watches epoch-over-epoch improvement: once the metric fails
    // to tick upward for `patience` consecutive epochs the metric has
    // genuinely flattened (a plateau of exact ties counts as flat).
    if (va > prev_auroc) {
      stale = 0;
    } else if (++stale >= cfg.patience) {
      history.stopped_early = true;
      break;
    }
    prev_auroc = va;
  }
  return {best, history};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kMapperFormatVersion = 1;

inline nlohmann::json to_json(const MapperParams& p, const MapperConfig& cfg) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers)
    layers.push_back({{"out", l.out_dim}, {"in", l.in_dim}, {"w", l.w}, {"b", l.b}});
  return nlohmann::json{
      {"format", "tac-mapper"},
      {"version", kMapperFormatVersion},
      {"input_dim", p.input_dim},
      {"x_mean", p.x_mean},
      {"x_std", p.x_std},
      {"layers", layers},
      {"config",
       {{"input_dim", cfg.input_dim},
        {"hidden_width", cfg.hidden_width},
        {"hidden_layers", cfg.hidden_layers},
        {"learning_rate", cfg.learning_rate},
        {"phi_rank", cfg.phi_rank},
        {"max_epochs", cfg.max_epochs},
        {"patience", cfg.patience},
        {"val_fraction", cfg.val_fraction},
        {"seed", cfg.seed}}}};
}

inline std::pair<MapperParams, MapperConfig> from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j["version"].get<int>() != kMapperFormatVersion)
    throw Error("mapper-version-mismatch",
                "expected tac-mapper version " +
                    std::to_string(kMapperFormatVersion));
  MapperParams p;
  p.input_dim = j.at("input_dim").get<int>();
  p.x_mean = j.at("x_mean").get<std::vector<double>>();
  p.x_std = j.at("x_std").get<std::vector<double>>();
  for (const auto& jl : j.at("layers")) {
    Layer l;
    l.out_dim = jl.at("out").get<std::size_t>();
    l.in_dim = jl.at("in").get<std::size_t>();
    l.w = jl.at("w").get<std::vector<double>>();
    l.b = jl.at("b").get<std::vector<double>>();
    if (l.w.size() != l.out_dim * l.in_dim || l.b.size() != l.out_dim)
      throw Error("invalid-mapper-file", "layer shape does not match arrays");
    p.layers.push_back(std::move(l));
  }
  if (p.layers.empty() || p.layers.back().out_dim != 1)
    throw Error("invalid-mapper-file", "missing scalar output head");
  MapperConfig cfg;
  if (j.contains("config")) {
    const auto& jc = j["config"];
    cfg.input_dim = jc.value("input_dim", p.input_dim);
    cfg.hidden_width = jc.value("hidden_width", cfg.hidden_width);
    cfg.hidden_layers = jc.value("hidden_layers", cfg.hidden_layers);
    cfg.learning_rate = jc.value("learning_rate", cfg.learning_rate);
    cfg.phi_rank = jc.value("phi_rank", cfg.phi_rank);
    cfg.max_epochs = jc.value("max_epochs", cfg.max_epochs);
    cfg.patience = jc.value("patience", cfg.patience);
    cfg.val_fraction = jc.value("val_fraction", cfg.val_fraction);
    cfg.seed = jc.value("seed", cfg.seed);
  }
  return {std::move(p), cfg};
}

}  // namespace tac::mapper
