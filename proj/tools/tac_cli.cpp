// Command-line surface for the truth-anchored calibration toolkit.
//
// Subcommands: eval, train, apply, protocol {fewshot,corrupt,transfer},
// lab prop2, diagram.  All tables emit as CSV or JSON so runs are diffable.
// Exit codes: 0 success, 1 usage error, 2 data/contract error.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tac/tac.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --seed wins; otherwise TAC_SEED from the environment; otherwise 0.
std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value) {
  if (seed_opt != nullptr && seed_opt->count() > 0) return flag_value;
  if (const char* env = std::getenv("TAC_SEED")) {
    const std::string s(env);
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
      throw UsageError("TAC_SEED must be an unsigned integer, got '" + s + "'");
    return v;
  }
  return 0;
}

tac::ingest::Format sniff_format(const std::string& path,
                                 const std::string& format_flag) {
  if (format_flag == "jsonl" || format_flag == "csv")
    return tac::ingest::format_from_string(format_flag);
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".csv" ? tac::ingest::Format::csv : tac::ingest::Format::jsonl;
}

tac::LabeledDataset load(const std::string& path, const std::string& format_flag) {
  return tac::ingest::load_records(path, sniff_format(path, format_flag));
}

// Vanilla treatment of a raw score: orient to confidence direction, then
// (optionally) min-max normalize so ECE is defined.
tac::metrics::ReliabilityReport vanilla_report(const tac::LabeledDataset& ds,
                                               const std::string& score,
                                               std::size_t bins, bool normalize) {
  const auto col = tac::extract_score_column(ds, score, tac::Orientation::defaults());
  std::vector<double> preds;
  std::vector<int> labels;
  preds.reserve(col.size());
  labels.reserve(col.size());
  for (const auto& [v, y] : col) {
    preds.push_back(v);
    labels.push_back(y);
  }
  if (normalize) preds = tac::metrics::minmax_normalize(preds);
  return tac::metrics::reliability_bins(preds, labels, bins);
}

// The file contract keeps tac_prob strictly inside (0,1); a saturated sigmoid
// can round to exactly 0 or 1 in doubles, so nudge those back in.
std::vector<double> interiorize(std::vector<double> probs) {
  constexpr double kFloor = 1e-12;
  for (double& p : probs) {
    if (p < kFloor) p = kFloor;
    if (p > 1.0 - kFloor) p = 1.0 - kFloor;
  }
  return probs;
}

tac::mapper::Batch make_batch(const tac::LabeledDataset& ds,
                              const std::string& score,
                              const std::optional<std::string>& pair) {
  const auto orient = tac::Orientation::defaults();
  return pair ? tac::supervision::pairwise_concat(ds, score, *pair, orient)
              : tac::supervision::single_score_batch(ds, score, orient);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw tac::Error("unwritable-path", "cannot open '" + path + "'");
  out << text;
  if (!out) throw tac::Error("unwritable-path", "write to '" + path + "' failed");
}

nlohmann::json read_mapper_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tac::Error("unreadable-path", "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw tac::Error("invalid-mapper-file", e.what());
  }
}

std::string protocol_csv(const std::string& label,
                         const tac::metrics::ReliabilityReport& before,
                         const tac::metrics::ReliabilityReport& after) {
  using tac::metrics::format_double;
  std::string out = "protocol,ece_vanilla,auroc_vanilla,ece_tac,auroc_tac\n";
  out += label + ',' + format_double(before.ece) + ',' +
         format_double(before.auroc) + ',' + format_double(after.ece) + ',' +
         format_double(after.auroc) + '\n';
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"truth-anchored calibration of uncertainty scores"};
  app.require_subcommand(1);

  std::string in_path, out_path, score, format_flag = "auto", mapper_path;
  std::string train_path, test_path, agg_flag = "sum";
  std::optional<std::string> pair;
  std::size_t bins = 10;
  bool normalize = false;
  double phi_rank = 1.0;
  std::uint64_t seed = 0;

  // ---- eval ----------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "vanilla metrics for one score column");
  eval->add_option("--in", in_path, "input records (JSONL or CSV)")->required();
  eval->add_option("--score", score, "score column name")->required();
  eval->add_option("--bins", bins, "number of equal-width bins (default 10)");
  eval->add_flag("--normalize", normalize,
                 "min-max normalize the oriented score before binning");
  eval->add_option("--format", format_flag, "jsonl|csv (default: by extension)");
  eval->callback([&] {
    const auto report = vanilla_report(load(in_path, format_flag), score, bins, normalize);
    std::cout << tac::metrics::to_json(report).dump(2) << '\n';
  });

  // ---- train ---------------------------------------------------------
  auto* train = app.add_subcommand("train", "fit a calibration mapper");
  train->add_option("--in", in_path, "training records")->required();
  train->add_option("--score", score, "score column name")->required();
  std::string pair_name;
  auto* pair_opt = train->add_option("--pair", pair_name,
                                     "second score column (2-D mapper)");
  train->add_option("--phi-rank", phi_rank, "ranking-loss weight (default 1)");
  auto* train_seed = train->add_option("--seed", seed, "RNG seed (default 0; TAC_SEED env)");
  train->add_option("--out", mapper_path, "write the fitted mapper JSON here");
  train->add_option("--format", format_flag, "jsonl|csv (default: by extension)");
  train->callback([&] {
    if (pair_opt->count() > 0) pair = pair_name;
    const auto ds = load(in_path, format_flag);
    const auto batch = make_batch(ds, score, pair);
    tac::mapper::MapperConfig cfg;
    cfg.input_dim = pair ? 2 : 1;
    cfg.phi_rank = phi_rank;
    cfg.seed = resolve_seed(train_seed, seed);
    const auto [params, history] = tac::mapper::train(batch, cfg);
    nlohmann::json summary{
        {"epochs_run", history.train_loss.size()},
        {"best_epoch", history.best_epoch},
        {"best_val_auroc", history.val_auroc[history.best_epoch]},
        {"final_train_loss", history.train_loss.back()},
        {"stopped_early", history.stopped_early}};
    std::cout << summary.dump(2) << '\n';
    if (!mapper_path.empty()) {
      auto j = tac::mapper::to_json(params, cfg);
      j["scores"] = pair ? std::vector<std::string>{score, *pair}
                         : std::vector<std::string>{score};
      write_text_file(mapper_path, j.dump(2) + "\n");
    }
  });

  // ---- apply ---------------------------------------------------------
  auto* apply = app.add_subcommand("apply", "calibrate records with a saved mapper");
  apply->add_option("--in", in_path, "input records")->required();
  apply->add_option("--mapper", mapper_path, "mapper JSON from `train --out`")->required();
  apply->add_option("--out", out_path, "calibrated JSONL destination")->required();
  apply->add_option("--format", format_flag, "jsonl|csv (default: by extension)");
  apply->callback([&] {
    const auto j = read_mapper_file(mapper_path);
    const auto [params, cfg] = tac::mapper::from_json(j);
    const auto names = j.value("scores", std::vector<std::string>{});
    if (static_cast<int>(names.size()) != params.input_dim)
      throw tac::Error("invalid-mapper-file",
                       "mapper lists " + std::to_string(names.size()) +
                           " score names for input_dim " +
                           std::to_string(params.input_dim));
    const auto ds = load(in_path, format_flag);
    const auto batch = make_batch(
        ds, names.at(0),
        names.size() > 1 ? std::optional<std::string>(names.at(1)) : std::nullopt);
    const auto probs = interiorize(tac::mapper::apply(params, batch.x));
    tac::ingest::write_calibrated(out_path, ds, probs);
  });

  // ---- protocol ------------------------------------------------------
  auto* protocol = app.add_subcommand("protocol", "supervision protocols around the mapper");
  protocol->require_subcommand(1);
  std::size_t k_labels = 8;
  double rate = 0.0;

  auto add_protocol_common = [&](CLI::App* sub, bool with_in) {
    if (with_in) sub->add_option("--in", in_path, "records")->required();
    sub->add_option("--score", score, "score column name")->required();
    sub->add_option("--bins", bins, "bins for ECE (default 10)");
    sub->add_option("--phi-rank", phi_rank, "ranking-loss weight (default 1)");
    sub->add_option("--format", format_flag, "jsonl|csv (default: by extension)");
    return sub->add_option("--seed", seed, "RNG seed (default 0; TAC_SEED env)");
  };

  auto* fewshot = protocol->add_subcommand("fewshot", "train on k labeled records");
  auto* fewshot_seed = add_protocol_common(fewshot, true);
  fewshot->add_option("--k", k_labels, "number of labeled records")->required();
  fewshot->callback([&] {
    const auto ds = load(in_path, format_flag);
    const auto s = resolve_seed(fewshot_seed, seed);
    const auto before = vanilla_report(ds, score, bins, true);
    const auto sub = tac::supervision::fewshot_subsample(ds, k_labels, s);
    tac::mapper::MapperConfig cfg;
    cfg.phi_rank = phi_rank;
    cfg.seed = s;
    const auto [params, history] =
        tac::mapper::train(make_batch(sub, score, std::nullopt), cfg);
    const auto full = make_batch(ds, score, std::nullopt);
    const auto after = tac::metrics::reliability_bins(
        tac::mapper::apply(params, full.x), full.y, bins);
    std::cout << protocol_csv("fewshot(k=" + std::to_string(k_labels) + ")",
                              before, after);
  });

  auto* corrupt = protocol->add_subcommand("corrupt", "train under label noise");
  auto* corrupt_seed = add_protocol_common(corrupt, true);
  corrupt->add_option("--rate", rate, "fraction of labels to flip")->required();
  corrupt->callback([&] {
    const auto ds = load(in_path, format_flag);
    const auto s = resolve_seed(corrupt_seed, seed);
    const auto before = vanilla_report(ds, score, bins, true);
    const auto noisy = tac::supervision::corrupt_labels(ds, rate, s);
    tac::mapper::MapperConfig cfg;
    cfg.phi_rank = phi_rank;
    cfg.seed = s;
    const auto [params, history] =
        tac::mapper::train(make_batch(noisy, score, std::nullopt), cfg);
    const auto full = make_batch(ds, score, std::nullopt);  // clean labels
    const auto after = tac::metrics::reliability_bins(
        tac::mapper::apply(params, full.x), full.y, bins);
    std::cout << protocol_csv("corrupt(rate=" + tac::metrics::format_double(rate) + ")",
                              before, after);
  });

  auto* transfer = protocol->add_subcommand("transfer", "train on one task, test on another");
  auto* transfer_seed = add_protocol_common(transfer, false);
  transfer->add_option("--train", train_path, "source records")->required();
  transfer->add_option("--test", test_path, "target records")->required();
  transfer->callback([&] {
    const auto src = load(train_path, format_flag);
    const auto dst = load(test_path, format_flag);
    const auto before = vanilla_report(dst, score, bins, true);
    tac::mapper::MapperConfig cfg;
    cfg.phi_rank = phi_rank;
    cfg.seed = resolve_seed(transfer_seed, seed);
    const auto after = tac::supervision::transfer_run(
        src, dst, score, cfg, tac::Orientation::defaults(), bins);
    std::cout << protocol_csv("transfer", before, after);
  });

  // ---- lab -----------------------------------------------------------
  auto* lab = app.add_subcommand("lab", "exact-enumeration bound laboratory");
  lab->require_subcommand(1);
  auto* prop2 = lab->add_subcommand("prop2", "two-response-world mixture sweep");
  std::size_t n_queries = 50;
  std::vector<double> lambdas;
  double bonus = 1.0986122886681098;  // ln 3
  prop2->add_option("--queries", n_queries, "number of queries in the world")->required();
  prop2->add_option("--lambdas", lambdas, "comma-separated mixture weights")
      ->required()
      ->delimiter(',');
  prop2->add_option("--bonus", bonus, "extra entropy on wrong responses (default ln 3)");
  prop2->add_option("--agg", agg_flag, "per-step entropy aggregation")
      ->check(CLI::IsMember({"sum", "mean"}));
  auto* prop2_seed = prop2->add_option("--seed", seed, "RNG seed (default 0; TAC_SEED env)");
  prop2->callback([&] {
    auto world = tac::lab::build_base_world(n_queries, 3, 12,
                                            resolve_seed(prop2_seed, seed));
    world.informative_bonus = bonus;
    const auto agg = agg_flag == "mean" ? tac::lab::Aggregation::mean
                                        : tac::lab::Aggregation::sum;
    std::cout << tac::lab::sweep_csv(world, lambdas, agg);
  });

  // ---- diagram -------------------------------------------------------
  auto* diagram = app.add_subcommand("diagram", "reliability bin table to CSV");
  diagram->add_option("--in", in_path, "input records")->required();
  diagram->add_option("--score", score, "score column name")->required();
  diagram->add_option("--bins", bins, "number of bins")->required();
  diagram->add_option("--out", out_path, "CSV destination")->required();
  diagram->add_flag("--normalize", normalize,
                    "min-max normalize the oriented score before binning");
  diagram->add_option("--format", format_flag, "jsonl|csv (default: by extension)");
  diagram->callback([&] {
    const auto report = vanilla_report(load(in_path, format_flag), score, bins, normalize);
    write_text_file(out_path, tac::metrics::bins_csv(report));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const tac::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
