#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capbench/corpus.hpp"
#include "capbench/metrics.hpp"

namespace capbench {

class ReportError : public std::runtime_error {
 public:
  explicit ReportError(const std::string& what) : std::runtime_error(what) {}
};

// ===== Run manifest =====

// Embedded in every output file so results are traceable to their inputs.
// Deterministic runs (replay or scripted backends) carry no timestamp, which
// keeps reruns byte-identical.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string config_digest = "-";
  std::string corpus_digest = "-";
  std::uint64_t seed = 41;
  bool deterministic = true;
  std::string timestamp;  // RFC 3339 UTC, live runs only

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

RunManifest make_manifest(const std::string& command, std::uint64_t seed,
                          bool deterministic);

// Digest over the canonical serialization of every puzzle, independent of
// where (or whether) the corpus lives on disk.
std::string corpus_digest(const Corpus& corpus);

// ===== Metric report =====

// One (model, category, condition) aggregate. acc_rate is a fraction in
// [0, 1]; report renderers that mirror percent-style tables scale by 100.
struct ReportRow {
  std::string model_id;
  Category category = Category::Icon;
  Condition condition = Condition::WithReasoning;
  int puzzle_count = 0;
  double acc_rate = 0.0;
  std::optional<double> l2;          // mean over length-matched predictions
  std::optional<double> steps;       // mean reasoning steps
  std::optional<double> length;      // mean reasoning tokens
  std::optional<double> score;       // judge ensemble mean, filled by merge
  std::optional<double> efficiency;  // cohort-normalized, needs >= 2 models
  std::optional<double> tci;
};

struct VerdictRow {
  std::string model_id;
  std::string puzzle_id;
  Condition condition = Condition::WithReasoning;
  bool matched = false;
  bool length_match = false;
  std::optional<double> l2;
};

struct MetricReport {
  RunManifest manifest;
  std::vector<ReportRow> rows;
  std::vector<VerdictRow> verdicts;

  const ReportRow* find_row(const std::string& model_id, Category category,
                            Condition condition) const;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static MetricReport load(const std::string& path);
};

struct BuildReportOptions {
  bool allow_partial = false;  // skip predictions whose puzzle id is unknown
  TciLexicon lexicon = TciLexicon::defaults();
};

// Scores every prediction against the corpus and aggregates per (model,
// category, condition): AccRate, L2, trace statistics, per-category efficiency
// over the model cohort, and TCI against the per-category population. Unknown
// puzzle ids raise ReportError naming them unless allow_partial is set.
MetricReport build_report(const Corpus& corpus,
                          const std::vector<PredictionRecord>& predictions,
                          const RunManifest& manifest,
                          const BuildReportOptions& options = {});

// Fills the score column from a judge score file (see cmd_judge output):
// entries keyed by (model_id, puzzle_id, condition) are averaged per row.
void merge_scores(MetricReport& report, const nlohmann::json& score_file);

// Fixed-width tables, one per populated metric and condition, 4 decimals.
std::string render_text(const MetricReport& report);

// Per-category metric vectors per model, ready for radar plotting.
nlohmann::json radar_export(const MetricReport& report);

}  // namespace capbench
