#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capbench/corpus.hpp"
#include "capbench/metrics.hpp"
#include "capbench/modelclient.hpp"

namespace capbench {

// ===== Errors =====

class AgentError : public std::runtime_error {
 public:
  explicit AgentError(const std::string& what) : std::runtime_error(what) {}
};

// Bracket text that cannot be tokenized into rows of cells.
class GridParseError : public AgentError {
 public:
  explicit GridParseError(const std::string& what) : AgentError(what) {}
};

// Tokenized fine but the cell layout is ragged or not square.
class GridShapeError : public AgentError {
 public:
  explicit GridShapeError(const std::string& what) : AgentError(what) {}
};

// ===== Routing =====

enum class Branch { Grid, NonGrid };

std::string to_string(Branch b);

// Default route per category: board-indexable puzzles take the grid branch,
// free-form spatial puzzles the non-grid branch.
Branch default_branch(Category c);

struct CategoryDecision {
  Branch branch = Branch::NonGrid;
  double confidence = 0.0;
  std::string rationale;
};

// ===== Symbol grid =====

struct CellRef {
  int row = 0;
  int col = 0;

  bool operator==(const CellRef&) const = default;
  bool operator<(const CellRef& o) const {
    return row != o.row ? row < o.row : col < o.col;
  }
};

struct SwapMove {
  CellRef a;
  CellRef b;

  bool operator==(const SwapMove&) const = default;
};

// Square symbolic abstraction of a puzzle board plus the affine map from cell
// indices to pixel coordinates.
struct SymbolGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::string> cells;  // row-major
  std::string empty_symbol = ".";
  Point origin;
  double cell_w = 0.0;
  double cell_h = 0.0;

  const std::string& at(int r, int c) const { return cells[r * cols + c]; }
  std::string& at(int r, int c) { return cells[r * cols + c]; }
  bool in_bounds(const CellRef& cell) const {
    return cell.row >= 0 && cell.row < rows && cell.col >= 0 && cell.col < cols;
  }
  Point cell_center(int r, int c) const;

  // "[a,a,a; b,b,c; c,b,b]" -> 3x3 grid. Throws GridParseError on untokenizable
  // text and GridShapeError on ragged or non-square layouts.
  static SymbolGrid parse(const std::string& text);
  static SymbolGrid from_board(const BoardInfo& board);
  std::string to_bracket_text() const;
};

// ===== Deterministic grid solvers =====

// First empty cell (row-major) whose occupation completes run_length player
// symbols in a row, column, or diagonal. nullopt when no winning cell exists.
std::optional<CellRef> solve_gobang(const SymbolGrid& grid, const std::string& player,
                                    int run_length = 5);

// First adjacent swap (lexicographic on cell pairs) of differing symbols that
// creates a run of three or more through a swapped cell. nullopt when no swap
// works. A pre-existing run does not count; the swap must create its own.
std::optional<SwapMove> solve_match3(const SymbolGrid& grid);

// All cells carrying the target symbol, row-major.
std::vector<CellRef> solve_select_all(const SymbolGrid& grid, const std::string& target);

// ===== Plans =====

struct ReasoningPlan {
  Branch branch = Branch::NonGrid;
  ReasoningTrace trace;
  std::vector<CellRef> target_cells;               // grid branch
  std::vector<std::string> target_descriptions;    // non-grid branch
};

struct GroundedPlan {
  ReasoningPlan plan;
  std::vector<Point> coordinates;  // one per target, plan order
  std::vector<ActionKind> kinds;   // interaction schema; a drag consumes two targets
};

struct Discrimination {
  bool pass = false;
  std::vector<std::string> reasons;
};

struct ExecutionResult {
  std::string puzzle_id;
  std::vector<ActionStep> steps;
  SequenceVerdict verdict;
  bool solved = false;
};

// ===== Pipeline configuration =====

struct PipelineConfig {
  std::string model_id = "agent";
  int gobang_run_length = 5;
  int min_trace_steps = 1;
  int max_trace_steps = 12;
  int max_concurrency = 4;
  bool backend_category_judge = false;  // rules route by default
  bool backend_discriminator = false;   // structural checks always run
  std::map<Category, Branch> branch_overrides;
  std::map<std::string, std::string> prompts;  // stage -> template override

  static PipelineConfig defaults();
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  Branch branch_for(Category c) const;
  // Stage template, with {placeholder} fields already substituted.
  std::string prompt(const std::string& stage,
                     const std::map<std::string, std::string>& fields) const;
};

// ===== Pipeline =====

struct StageLogEntry {
  std::string puzzle_id;
  std::string stage;
  nlohmann::json detail;
};

struct PuzzleOutcome {
  std::string puzzle_id;
  Category category = Category::Icon;
  CategoryDecision decision;
  std::optional<GroundedPlan> plan;
  Discrimination discrimination;
  std::optional<ExecutionResult> execution;
  bool solved = false;
  std::optional<std::string> error;

  nlohmann::json to_json() const;
};

struct RunSummary {
  std::vector<PuzzleOutcome> outcomes;          // corpus order
  std::vector<PredictionRecord> predictions;    // one per executed puzzle
  int solved_count = 0;
  int total = 0;

  double solve_rate() const { return total == 0 ? 0.0 : double(solved_count) / total; }
};

// Per-puzzle context threaded through the stages: the branch decision, the
// symbolic grid when on the grid branch, and the deterministic solver's answer
// (authoritative over anything the backend narrates).
struct StageContext {
  Branch branch = Branch::NonGrid;
  std::optional<SymbolGrid> grid;
  std::vector<CellRef> solver_targets;
  std::string solver_note;
};

class Pipeline {
 public:
  Pipeline(std::shared_ptr<Backend> backend, PipelineConfig config);

  // Needed to attach puzzle screenshots to backend calls; without it the
  // stages run text-only, which is what scripted fixtures use.
  void set_corpus_root(const std::filesystem::path& root) { root_ = root; }

  CategoryDecision judge_category(const Puzzle& p);
  SymbolGrid map_to_grid(const Puzzle& p);
  ReasoningPlan generate_reasoning(const Puzzle& p, const StageContext& ctx);
  GroundedPlan spatial_ground(const ReasoningPlan& plan, const Puzzle& p,
                              const StageContext& ctx);
  Discrimination discriminate(const GroundedPlan& plan, const Puzzle& p,
                              const StageContext& ctx);
  std::vector<ActionStep> generate_actions(const GroundedPlan& plan);
  ExecutionResult execute_simulated(const std::vector<ActionStep>& actions,
                                    const Puzzle& p);

  PuzzleOutcome run_puzzle(const Puzzle& p);
  RunSummary run(const Corpus& corpus);

  const PipelineConfig& config() const { return config_; }
  const std::vector<StageLogEntry>& trace_log() const { return log_; }
  void clear_log() { log_.clear(); }
  void write_trace_log(const std::filesystem::path& path) const;

 private:
  Exchange ask(const Puzzle& p, const std::string& stage, const std::string& user_text);
  void log_stage(const std::string& puzzle_id, const std::string& stage,
                 nlohmann::json detail);
  void sort_log(const Corpus& corpus);

  std::shared_ptr<Backend> backend_;
  PipelineConfig config_;
  std::filesystem::path root_;
  std::mutex log_mu_;
  std::vector<StageLogEntry> log_;
};

}  // namespace capbench
