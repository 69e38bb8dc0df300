#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tac/core.hpp"
#include "tac/error.hpp"

namespace tac::ingest {

enum class Format { jsonl, csv };

inline Format format_from_string(const std::string& s) {
  if (s == "jsonl") return Format::jsonl;
  if (s == "csv") return Format::csv;
  throw Error("unknown-format", "format must be jsonl or csv, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Derived logit-based proxies. Log-probabilities are natural log throughout.
// ---------------------------------------------------------------------------

// Sequence log-probability (sum of token log-probs); confidence direction.
inline double derive_log_msp(const std::vector<double>& token_logprobs) {
  if (token_logprobs.empty())
    throw Error("empty-logprobs", "derive_log_msp needs at least one token");
  double sum = 0.0;
  for (const double lp : token_logprobs) {
    if (lp > 0.0)
      throw Error("positive-logprob", "token log-probability above 0");
    sum += lp;
  }
  return sum;
}

// exp of negative mean log-likelihood; uncertainty direction, >= 1.
inline double derive_perplexity(const std::vector<double>& token_logprobs) {
  const double sum = derive_log_msp(token_logprobs);
  return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

// Arithmetic mean of per-step entropies (nats); uncertainty direction.
inline double derive_mean_entropy(const std::vector<double>& step_entropies) {
  if (step_entropies.empty())
    throw Error("empty-entropies", "derive_mean_entropy needs at least one step");
  double sum = 0.0;
  for (const double h : step_entropies) {
    if (h < 0.0) throw Error("negative-entropy", "step entropy below 0");
    sum += h;
  }
  return sum / static_cast<double>(step_entropies.size());
}

namespace detail {

inline ScoreRecord record_from_json(const nlohmann::json& obj, std::size_t line_no,
                                    std::size_t ordinal) {
  auto where = [line_no] { return " (line " + std::to_string(line_no) + ")"; };
  if (!obj.is_object())
    throw Error("malformed-line", "not a JSON object" + where());

  ScoreRecord rec;
  if (obj.contains("id")) {
    const auto& jid = obj["id"];
    if (jid.is_string())
      rec.id = jid.get<std::string>();
    else if (jid.is_number_integer())
      rec.id = std::to_string(jid.get<long long>());
    else
      throw Error("bad-id", "id must be a string" + where());
  } else {
    rec.id = std::to_string(ordinal);
  }

  if (!obj.contains("label"))
    throw Error("missing-label", "record has no label" + where());
  const auto& jl = obj["label"];
  double label_val = -1.0;
  if (jl.is_number()) label_val = jl.get<double>();
  if (label_val != 0.0 && label_val != 1.0)
    throw Error("bad-label", "label must be 0 or 1" + where());
  rec.label = static_cast<int>(label_val);

  if (obj.contains("scores")) {
    const auto& js = obj["scores"];
    if (!js.is_object())
      throw Error("malformed-line", "scores must be an object" + where());
    for (const auto& [name, val] : js.items()) {
      if (!val.is_number())
        throw Error("bad-number", "score '" + name + "' not numeric" + where());
      rec.scores[name] = val.get<double>();
    }
  }

  auto read_array = [&](const char* key) -> std::optional<std::vector<double>> {
    if (!obj.contains(key)) return std::nullopt;
    const auto& ja = obj[key];
    if (!ja.is_array())
      throw Error("malformed-line", std::string(key) + " must be an array" + where());
    std::vector<double> out;
    out.reserve(ja.size());
    for (const auto& v : ja) {
      if (!v.is_number())
        throw Error("bad-number", std::string(key) + " entry not numeric" + where());
      out.push_back(v.get<double>());
    }
    return out;
  };
  rec.token_logprobs = read_array("token_logprobs");
  rec.step_entropies = read_array("step_entropies");
  if (rec.token_logprobs)
    for (const double lp : *rec.token_logprobs)
      if (lp > 0.0)
        throw Error("positive-logprob", "token_logprobs entry above 0" + where());
  if (rec.step_entropies)
    for (const double h : *rec.step_entropies)
      if (h < 0.0)
        throw Error("negative-entropy", "step_entropies entry below 0" + where());

  if (obj.contains("meta")) {
    const auto& jm = obj["meta"];
    if (!jm.is_object())
      throw Error("malformed-line", "meta must be an object" + where());
    for (const auto& [k, v] : jm.items()) {
      if (!v.is_string())
        throw Error("malformed-line", "meta values must be strings" + where());
      rec.meta[k] = v.get<std::string>();
    }
  }
  return rec;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_number(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw Error("bad-number", "'" + s + "' is not a number (line " +
                                  std::to_string(line_no) + ")");
  return v;
}

// Fills in the standard derived proxies when the raw arrays are present and
// the corresponding column has not been supplied, then enforces that every
// record carries at least one score.
inline void finalize_record(ScoreRecord& rec, std::size_t line_no) {
  if (rec.token_logprobs) {
    if (!rec.scores.count("log_msp"))
      rec.scores["log_msp"] = derive_log_msp(*rec.token_logprobs);
    if (!rec.scores.count("perplexity"))
      rec.scores["perplexity"] = derive_perplexity(*rec.token_logprobs);
  }
  if (rec.step_entropies && !rec.scores.count("mean_entropy"))
    rec.scores["mean_entropy"] = derive_mean_entropy(*rec.step_entropies);
  if (rec.scores.empty())
    throw Error("empty-scores", "record '" + rec.id + "' has no scores (line " +
                                    std::to_string(line_no) + ")");
}

}  // namespace detail

// Reads a score-label file. JSONL: one object per line with keys id
// (optional), label (0/1, required), scores (object), token_logprobs,
// step_entropies, meta. CSV: header row with a required `label` column and
// an optional `id` column; every other column is a numeric score. Row order
// is preserved; missing ids become sequential decimal indices.
inline LabeledDataset load_records(const std::string& path, Format format) {
  std::ifstream in(path);
  if (!in) throw Error("unreadable-path", "cannot open '" + path + "'");

  LabeledDataset ds;
  ds.source_tag = path;
  std::set<std::string> seen_ids;
  auto check_id = [&](const std::string& id, std::size_t line_no) {
    if (!seen_ids.insert(id).second)
      throw Error("duplicate-id", "id '" + id + "' repeats (line " +
                                      std::to_string(line_no) + ")");
  };

  std::string line;
  std::size_t line_no = 0;
  if (format == Format::jsonl) {
    std::size_t ordinal = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error("malformed-line",
                    "line " + std::to_string(line_no) + ": " + e.what());
      }
      ScoreRecord rec = detail::record_from_json(obj, line_no, ordinal);
      detail::finalize_record(rec, line_no);
      check_id(rec.id, line_no);
      ds.records.push_back(std::move(rec));
      ++ordinal;
    }
    return ds;
  }

  // CSV
  if (!std::getline(in, line))
    throw Error("malformed-line", "empty CSV file '" + path + "'");
  ++line_no;
  const auto header = detail::split_csv_line(line);
  std::ptrdiff_t label_col = -1, id_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") label_col = static_cast<std::ptrdiff_t>(c);
    if (header[c] == "id") id_col = static_cast<std::ptrdiff_t>(c);
  }
  if (label_col < 0)
    throw Error("missing-label", "CSV header has no 'label' column");

  std::size_t ordinal = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw Error("malformed-line",
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    ScoreRecord rec;
    const double label_val =
        detail::parse_number(fields[static_cast<std::size_t>(label_col)], line_no);
    if (label_val != 0.0 && label_val != 1.0)
      throw Error("bad-label",
                  "label must be 0 or 1 (line " + std::to_string(line_no) + ")");
    rec.label = static_cast<int>(label_val);
    rec.id = id_col >= 0 ? fields[static_cast<std::size_t>(id_col)]
                         : std::to_string(ordinal);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == label_col ||
          static_cast<std::ptrdiff_t>(c) == id_col)
        continue;
      rec.scores[header[c]] = detail::parse_number(fields[c], line_no);
    }
    detail::finalize_record(rec, line_no);
    check_id(rec.id, line_no);
    ds.records.push_back(std::move(rec));
    ++ordinal;
  }
  return ds;
}

// Writes records with their calibrated probability as JSONL; `tac_prob` is
// stored in the scores object so the output loads back through load_records.
// Numbers round-trip exactly (shortest decimal representation).
inline void write_calibrated(const std::string& path, const LabeledDataset& ds,
                             const std::vector<double>& probs) {
  if (probs.size() != ds.size())
    throw Error("length-mismatch", "probs and dataset differ in length");
  for (const double p : probs)
    if (!(p > 0.0 && p < 1.0))
      throw Error("invalid-prob",
                  "calibrated probability " + std::to_string(p) +
                      " outside (0,1)");
  std::ofstream out(path);
  if (!out) throw Error("unwritable-path", "cannot open '" + path + "' for write");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds.records[i];
    nlohmann::json scores(rec.scores);
    scores["tac_prob"] = probs[i];
    nlohmann::json obj{{"id", rec.id}, {"label", rec.label}, {"scores", scores}};
    if (!rec.meta.empty()) obj["meta"] = rec.meta;
    out << obj.dump() << '\n';
  }
  if (!out) throw Error("unwritable-path", "write to '" + path + "' failed");
}

}  // namespace tac::ingest
