#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capbench/geometry.hpp"

namespace capbench {

// ===== Taxonomy =====

enum class Category {
  Gobang,
  Icon,
  IconCrush,
  Recaptcha,
  SpaceReasoning,
  Hcaptcha,
  Vtt,
};

const std::vector<Category>& all_categories();
std::string to_string(Category c);
std::optional<Category> category_from_string(const std::string& s);

enum class ActionKind { Click, Down, Up, Drag, Move };

std::string to_string(ActionKind k);
std::optional<ActionKind> action_kind_from_string(const std::string& s);

// ===== Records =====

// One ground-truth step: the expected action kind plus the region a correct
// coordinate must land in. For drags the region grounds the end point;
// start_region, when declared, additionally grounds the start point.
struct TruthStep {
  ActionKind kind = ActionKind::Click;
  Region region;
  std::optional<Region> start_region;
};

// One predicted or executed action. clicks/downs/ups/moves land at
// `coordinate`; drags run from `coordinate` to `end`.
struct ActionStep {
  ActionKind kind = ActionKind::Click;
  Point coordinate;
  std::optional<Point> end;
};

// Lattice annotation carried by board-based puzzles: pixel geometry of the
// grid plus the authored cell symbols, row-major.
struct BoardInfo {
  Point origin;
  double cell_w = 0.0, cell_h = 0.0;
  int rows = 0, cols = 0;
  std::vector<std::string> symbols;
  std::string empty_symbol = ".";
  std::optional<std::string> player_symbol;  // Gobang: the side to complete
  std::optional<std::string> target_symbol;  // Recaptcha: cells to select

  Point cell_center(int r, int c) const;
};

// Ordered step-by-step explanation; each entry is one non-empty step text.
using ReasoningTrace = std::vector<std::string>;

struct Puzzle {
  std::string id;
  Category category = Category::Icon;
  std::string image_path;  // relative to the corpus directory
  double image_w = 0.0, image_h = 0.0;
  std::string prompt;
  std::vector<TruthStep> truth;
  std::optional<ReasoningTrace> reference_reasoning;
  std::optional<BoardInfo> board;

  bool in_bounds(const Point& p) const;
};

struct Corpus {
  std::string dir;  // directory the corpus was loaded from (empty if built in code)
  std::vector<Puzzle> puzzles;

  const Puzzle* find(const std::string& id) const;
  std::map<std::string, int> category_counts() const;
};

enum class Condition { WithReasoning, WithoutReasoning };
std::string to_string(Condition c);
std::optional<Condition> condition_from_string(const std::string& s);

// One model answer for one puzzle under one condition.
struct PredictionRecord {
  std::string model_id;
  std::string puzzle_id;
  Condition condition = Condition::WithReasoning;
  std::vector<ActionStep> predicted;
  std::optional<ReasoningTrace> trace;
  std::optional<std::int64_t> raw_token_count;
};

// ===== I/O =====

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared serialization atoms: points as [x, y] arrays, action steps as
// {"kind", "coordinate", "end"?} objects.
nlohmann::json point_to_json(const Point& p);
Point point_from_json(const nlohmann::json& j);
nlohmann::json action_step_to_json(const ActionStep& s);
ActionStep action_step_from_json(const nlohmann::json& j);
nlohmann::json puzzle_to_json(const Puzzle& p);
Puzzle puzzle_from_json(const nlohmann::json& j);

// Reads a corpus directory: manifest.json plus the line-delimited record file
// it names (one puzzle object per line). Malformed records raise CorpusError
// with the 1-based line number; duplicate ids and dangling image references
// are rejected. The format is documented in docs/corpus-format.md.
Corpus load_corpus(const std::string& dir);

// Writes manifest.json and the record file with sorted keys and
// shortest-round-trip numbers, so identical corpora are byte-identical.
void save_corpus(const Corpus& corpus, const std::string& dir);

std::vector<PredictionRecord> load_predictions(const std::string& path);
void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::string& path);

// ===== Validation =====

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string puzzle_id;  // empty for corpus-level findings
  std::string message;
};

// Semantic checks over a parsed corpus: region invariants, declared centers
// inside their regions, truth shape, board annotations, bounds. Empty result
// means every puzzle passes.
std::vector<Diagnostic> validate_corpus(const Corpus& corpus);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace capbench
