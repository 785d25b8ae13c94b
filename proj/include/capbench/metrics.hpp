#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capbench/corpus.hpp"

namespace capbench {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatchError : MetricError {
  LengthMismatchError(std::size_t predicted, std::size_t truth);
  std::size_t predicted_len;
  std::size_t truth_len;
};

// ===== Sequence scoring =====

struct StepVerdict {
  bool kind_match = false;
  bool region_hit = false;
  double l2 = 0.0;  // distance from the grounded coordinate to the region center
};

// The all-steps indicator: matched is true only when the predicted sequence
// has the truth's length and every step matches in kind, order, and region
// membership. The grounded coordinate per step follows the truth step's kind:
// drags are scored at their end point (plus the optional start region on the
// start point), everything else at the action coordinate.
struct SequenceVerdict {
  std::string puzzle_id;
  bool length_match = false;
  bool matched = false;
  std::vector<StepVerdict> per_step;       // empty when lengths differ
  std::optional<double> mean_l2;           // only when lengths match
};

SequenceVerdict sequence_verdict(const std::vector<ActionStep>& predicted,
                                 const Puzzle& puzzle);

bool sequence_match(const std::vector<ActionStep>& predicted,
                    const Puzzle& puzzle);

// Fraction of matched verdicts. Throws MetricError on empty input.
double acc_rate(const std::vector<SequenceVerdict>& verdicts);

// Mean Euclidean distance from grounded coordinates to region centers.
// Throws LengthMismatchError when the prediction length differs from truth.
double l2_distance(const std::vector<ActionStep>& predicted,
                   const Puzzle& puzzle);

// ===== Trace size =====

// Tokens are maximal runs of non-whitespace Unicode scalars; the text is
// decoded as UTF-8 with undecodable bytes treated as ordinary characters.
std::size_t count_tokens(const std::string& text);

std::size_t reasoning_steps(const ReasoningTrace& trace);

// Token count of the whole trace (steps joined by single spaces).
std::size_t reasoning_length(const ReasoningTrace& trace);

// ===== Efficiency =====

struct EfficiencyInput {
  std::string model_id;
  double acc = 0.0;     // solving accuracy, any consistent scale
  double length = 0.0;  // mean reasoning tokens, > 0
  double steps = 0.0;   // mean reasoning steps, > 0
};

struct EfficiencyEntry {
  std::string model_id;
  double raw = 0.0;         // acc / (0.5*length/mean_length + 0.5*steps/mean_steps)
  double normalized = 0.0;  // min-max over the cohort
};

struct CohortStats {
  double mean_length = 0.0;
  double mean_steps = 0.0;
  std::vector<EfficiencyEntry> members;
  // All raw values equal: min-max is undefined, every member reports 1.0.
  bool degenerate = false;

  std::map<std::string, double> normalized() const;
};

// Cost-normalized accuracy over a cohort of models, min-max scaled so the
// best member gets 1.0 and the worst 0.0. Throws MetricError for cohorts
// smaller than two or non-positive length/steps.
CohortStats efficiency(const std::vector<EfficiencyInput>& cohort);

// ===== Trajectory complexity =====

// Feature lexicons are configuration data (see configs/tci_lexicon.json);
// defaults() mirrors the shipped file.
struct TciLexicon {
  std::vector<std::string> backtracking_terms;     // whole words, case-insensitive
  std::vector<std::string> coordinate_patterns;    // regexes, case-insensitive
  std::vector<std::string> grid_index_patterns;    // regexes, case-insensitive

  static TciLexicon defaults();
  static TciLexicon load(const std::string& path);
};

struct TciFeatures {
  double backtracking = 0.0;
  double coordinates = 0.0;
  double grid_indices = 0.0;
  double steps = 0.0;
  double tokens = 0.0;
};

TciFeatures extract_tci_features(const ReasoningTrace& trace,
                                 const TciLexicon& lexicon);

struct TciPopulation {
  double mean_backtracking = 0.0;
  double mean_coordinates = 0.0;
  double mean_grid_indices = 0.0;
  double mean_steps = 0.0;
  double mean_tokens = 0.0;

  static TciPopulation from(const std::vector<TciFeatures>& group);
};

double sigmoid(double x);

// Sigmoid of the group's mean per-instance z, where z sums the instance's
// feature deviations from the reference means and divides by the instance's
// cost ratio (0.5*steps/mean_steps + 0.5*tokens/mean_tokens). The two-arg
// form scores a group against a wider population; the one-arg form uses the
// group itself as the reference. Throws MetricError for empty groups or
// non-positive mean costs.
double tci(const std::vector<TciFeatures>& group);
double tci(const std::vector<TciFeatures>& group,
           const TciPopulation& population);

}  // namespace capbench
