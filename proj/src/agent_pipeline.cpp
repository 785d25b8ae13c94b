#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "capbench/agent.hpp"
#include "capbench/ioutil.hpp"

namespace fs = std::filesystem;

namespace capbench {

using nlohmann::json;

// ===== Small helpers =====

namespace {

std::string lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return s;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string first_line(const std::string& s) {
  const std::size_t nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string number_text(double v) { return json(v).dump(); }

std::string cell_text(const CellRef& c) {
  return "(" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")";
}

json cells_to_json(const std::vector<CellRef>& cells) {
  json out = json::array();
  for (const CellRef& c : cells) out.push_back(json::array({c.row, c.col}));
  return out;
}

}  // namespace

// ===== Pipeline =====

Pipeline::Pipeline(std::shared_ptr<Backend> backend, PipelineConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) throw AgentError("pipeline needs a backend");
}

Exchange Pipeline::ask(const Puzzle& p, const std::string& stage,
                       const std::string& user_text) {
  ModelRequest req;
  req.system = "You are a precise assistant for solving visual verification puzzles.";
  req.user = user_text;
  req.meta_puzzle_id = p.id;
  req.meta_stage = stage;
  if (!root_.empty() && !p.image_path.empty()) {
    const fs::path img = root_ / p.image_path;
    std::error_code ec;
    if (fs::exists(img, ec)) {
      const std::string bytes = read_text_file(img.string());
      req.image.assign(bytes.begin(), bytes.end());
    }
  }
  return req.image.empty() ? backend_->complete(req) : backend_->complete_vision(req);
}

void Pipeline::log_stage(const std::string& puzzle_id, const std::string& stage,
                         json detail) {
  std::lock_guard<std::mutex> lock(log_mu_);
  log_.push_back({puzzle_id, stage, std::move(detail)});
}

void Pipeline::sort_log(const Corpus& corpus) {
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < corpus.puzzles.size(); ++i)
    order[corpus.puzzles[i].id] = i;
  std::stable_sort(log_.begin(), log_.end(),
                   [&](const StageLogEntry& a, const StageLogEntry& b) {
                     return order[a.puzzle_id] < order[b.puzzle_id];
                   });
}

void Pipeline::write_trace_log(const fs::path& path) const {
  std::string out;
  for (const StageLogEntry& e : log_) {
    json j;
    j["puzzle_id"] = e.puzzle_id;
    j["stage"] = e.stage;
    j["detail"] = e.detail;
    out += j.dump() + "\n";
  }
  write_text_file(path.string(), out);
}

// ===== Stages =====

CategoryDecision Pipeline::judge_category(const Puzzle& p) {
  CategoryDecision d;
  d.branch = config_.branch_for(p.category);
  d.confidence = 1.0;
  d.rationale = "category routing for " + to_string(p.category);
  if (config_.backend_category_judge) {
    const Exchange ex = ask(p, "category", config_.prompt("category", {{"prompt", p.prompt}}));
    const std::string reply = lower(ex.response);
    if (reply.find("non_grid") != std::string::npos ||
        reply.find("non-grid") != std::string::npos) {
      d.branch = Branch::NonGrid;
      d.rationale = "backend routed: " + first_line(ex.response);
    } else if (reply.find("grid") != std::string::npos) {
      d.branch = Branch::Grid;
      d.rationale = "backend routed: " + first_line(ex.response);
    } else {
      d.rationale += " (backend reply unusable, kept default)";
    }
  }
  log_stage(p.id, "category",
            {{"branch", to_string(d.branch)},
             {"confidence", d.confidence},
             {"rationale", d.rationale}});
  return d;
}

SymbolGrid Pipeline::map_to_grid(const Puzzle& p) {
  if (!p.board)
    throw AgentError("puzzle " + p.id +
                     " has no board annotation; cell-to-pixel bounds are unavailable");
  const std::string prompt = config_.prompt("map", {{"prompt", p.prompt}});

  std::optional<SymbolGrid> grid;
  std::string parse_error;
  for (int attempt = 0; attempt < 2 && !grid; ++attempt) {
    const std::string user =
        attempt == 0 ? prompt
                     : "Your previous reply could not be parsed (" + parse_error +
                           "). " + prompt;
    const Exchange ex = ask(p, "map", user);
    try {
      grid = SymbolGrid::parse(ex.response);
    } catch (const GridShapeError&) {
      throw;  // wrong layout is a hard error, not a formatting slip
    } catch (const GridParseError& e) {
      parse_error = e.what();
    }
  }
  if (!grid)
    throw AgentError("puzzle " + p.id + ": grid text unparseable after re-prompt (" +
                     parse_error + ")");
  if (grid->rows != p.board->rows || grid->cols != p.board->cols)
    throw GridShapeError("puzzle " + p.id + ": mapped grid is " +
                         std::to_string(grid->rows) + "x" + std::to_string(grid->cols) +
                         " but the board annotation declares " +
                         std::to_string(p.board->rows) + "x" +
                         std::to_string(p.board->cols));
  grid->empty_symbol = p.board->empty_symbol;
  grid->origin = p.board->origin;
  grid->cell_w = p.board->cell_w;
  grid->cell_h = p.board->cell_h;
  log_stage(p.id, "map", {{"grid", grid->to_bracket_text()}});
  return *grid;
}

ReasoningPlan Pipeline::generate_reasoning(const Puzzle& p, const StageContext& ctx) {
  std::string prompt;
  const bool need_cells = ctx.branch == Branch::Grid && ctx.solver_targets.empty();
  if (ctx.branch == Branch::Grid) {
    const std::string solver_field =
        ctx.solver_targets.empty()
            ? "Also include a \"cells\" array of [row, col] targets in the JSON block."
            : "The answer is fixed by the board solver: " + ctx.solver_note +
                  ". Explain step by step why it is correct.";
    prompt = config_.prompt("reason_grid",
                            {{"prompt", p.prompt},
                             {"grid", ctx.grid ? ctx.grid->to_bracket_text() : "(none)"},
                             {"solver", solver_field}});
  } else {
    prompt = config_.prompt("reason_free", {{"prompt", p.prompt}});
  }

  ReasoningPlan plan;
  plan.branch = ctx.branch;
  std::string reject;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string user =
        attempt == 0 ? prompt
                     : "Your previous reply was not usable (" + reject + "). " + prompt;
    const Exchange ex = ask(p, "reason", user);
    const std::optional<json> block = extract_fenced_json(ex.response);
    if (!block) {
      reject = "no fenced JSON block";
      continue;
    }
    if (!block->contains("steps") || !(*block)["steps"].is_array() ||
        (*block)["steps"].empty()) {
      reject = "missing non-empty steps array";
      continue;
    }
    ReasoningTrace trace;
    bool ok = true;
    for (const json& s : (*block)["steps"]) {
      if (!s.is_string() || is_blank(s.get<std::string>())) {
        ok = false;
        reject = "steps must be non-blank strings";
        break;
      }
      trace.push_back(s.get<std::string>());
    }
    if (!ok) continue;

    std::vector<std::string> descriptions;
    if (ctx.branch == Branch::NonGrid) {
      if (!block->contains("targets") || !(*block)["targets"].is_array() ||
          (*block)["targets"].empty()) {
        reject = "missing non-empty targets array";
        continue;
      }
      for (const json& t : (*block)["targets"]) {
        if (!t.is_string() || is_blank(t.get<std::string>())) {
          ok = false;
          reject = "targets must be non-blank strings";
          break;
        }
        descriptions.push_back(t.get<std::string>());
      }
      if (!ok) continue;
    }

    std::vector<CellRef> cells;
    if (need_cells) {
      if (!block->contains("cells") || !(*block)["cells"].is_array() ||
          (*block)["cells"].empty()) {
        reject = "missing non-empty cells array";
        continue;
      }
      for (const json& c : (*block)["cells"]) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() ||
            !c[1].is_number_integer()) {
          ok = false;
          reject = "cells must be [row, col] integer pairs";
          break;
        }
        cells.push_back({c[0].get<int>(), c[1].get<int>()});
      }
      if (!ok) continue;
    }

    plan.trace = std::move(trace);
    plan.target_descriptions = std::move(descriptions);
    plan.target_cells = need_cells ? std::move(cells) : ctx.solver_targets;
    log_stage(p.id, "reason",
              {{"steps", plan.trace},
               {"targets", plan.target_descriptions},
               {"cells", cells_to_json(plan.target_cells)}});
    return plan;
  }
  throw AgentError("puzzle " + p.id + ": reasoning reply unusable after re-prompt (" +
                   reject + ")");
}

GroundedPlan Pipeline::spatial_ground(const ReasoningPlan& plan, const Puzzle& p,
                                      const StageContext& ctx) {
  GroundedPlan g;
  g.plan = plan;
  for (const TruthStep& t : p.truth) g.kinds.push_back(t.kind);

  if (plan.branch == Branch::Grid) {
    if (!ctx.grid) throw AgentError("grid-branch grounding needs the symbol grid");
    for (const CellRef& cell : plan.target_cells) {
      if (!ctx.grid->in_bounds(cell))
        throw AgentError("puzzle " + p.id + ": target cell " + cell_text(cell) +
                         " outside the " + std::to_string(ctx.grid->rows) + "x" +
                         std::to_string(ctx.grid->cols) + " grid");
      g.coordinates.push_back(ctx.grid->cell_center(cell.row, cell.col));
    }
  } else {
    std::ostringstream listing;
    for (std::size_t i = 0; i < plan.target_descriptions.size(); ++i)
      listing << (i + 1) << ". " << plan.target_descriptions[i] << "\n";
    const std::string prompt =
        config_.prompt("ground", {{"targets", listing.str()},
                                  {"width", number_text(p.image_w)},
                                  {"height", number_text(p.image_h)}});

    std::string reject;
    bool grounded = false;
    for (int attempt = 0; attempt < 2 && !grounded; ++attempt) {
      const std::string user =
          attempt == 0 ? prompt
                       : "Your previous reply was not usable (" + reject + "). " + prompt;
      const Exchange ex = ask(p, "ground", user);
      const std::optional<json> block = extract_fenced_json(ex.response);
      if (!block || !block->contains("coordinates") ||
          !(*block)["coordinates"].is_array()) {
        reject = "missing coordinates array";
        continue;
      }
      const json& coords = (*block)["coordinates"];
      if (coords.size() != plan.target_descriptions.size()) {
        reject = "got " + std::to_string(coords.size()) + " coordinates for " +
                 std::to_string(plan.target_descriptions.size()) + " targets";
        continue;
      }
      std::vector<Point> pts;
      bool ok = true;
      for (const json& c : coords) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
          ok = false;
          reject = "coordinates must be [x, y] number pairs";
          break;
        }
        const Point pt{c[0].get<double>(), c[1].get<double>()};
        if (!p.in_bounds(pt)) {
          ok = false;
          reject = "coordinate (" + number_text(pt.x) + ", " + number_text(pt.y) +
                   ") is outside the image";
          break;
        }
        pts.push_back(pt);
      }
      if (!ok) continue;
      g.coordinates = std::move(pts);
      grounded = true;
    }
    if (!grounded)
      throw AgentError("puzzle " + p.id + ": grounding reply unusable after re-prompt (" +
                       reject + ")");
  }

  json coord_json = json::array();
  for (const Point& pt : g.coordinates) coord_json.push_back(point_to_json(pt));
  log_stage(p.id, "ground", {{"coordinates", coord_json}});
  return g;
}

Discrimination Pipeline::discriminate(const GroundedPlan& g, const Puzzle& p,
                                      const StageContext& ctx) {
  Discrimination d;
  const ReasoningPlan& plan = g.plan;

  if (plan.trace.empty()) {
    d.reasons.push_back("empty reasoning trace");
  } else {
    const int n = static_cast<int>(plan.trace.size());
    if (n < config_.min_trace_steps || n > config_.max_trace_steps)
      d.reasons.push_back("step count " + std::to_string(n) +
                          " outside configured bounds [" +
                          std::to_string(config_.min_trace_steps) + ", " +
                          std::to_string(config_.max_trace_steps) + "]");
  }

  for (const Point& pt : g.coordinates)
    if (!p.in_bounds(pt))
      d.reasons.push_back("coordinate (" + number_text(pt.x) + ", " + number_text(pt.y) +
                          ") outside image bounds");

  if (plan.branch == Branch::Grid) {
    if (ctx.grid) {
      for (const CellRef& cell : plan.target_cells)
        if (!ctx.grid->in_bounds(cell))
          d.reasons.push_back("target cell " + cell_text(cell) + " outside the " +
                              std::to_string(ctx.grid->rows) + "x" +
                              std::to_string(ctx.grid->cols) + " grid");
    }
    if (!ctx.solver_targets.empty() && plan.target_cells != ctx.solver_targets)
      d.reasons.push_back("target-solver mismatch");
  }

  if (g.kinds.empty()) {
    d.reasons.push_back("empty action schema");
  } else {
    std::size_t needed = 0;
    for (ActionKind k : g.kinds) needed += k == ActionKind::Drag ? 2 : 1;
    if (needed != g.coordinates.size())
      d.reasons.push_back("have " + std::to_string(g.coordinates.size()) +
                          " coordinates but the action schema needs " +
                          std::to_string(needed));
  }

  if (d.reasons.empty() && config_.backend_discriminator) {
    std::ostringstream steps;
    for (std::size_t i = 0; i < plan.trace.size(); ++i)
      steps << (i + 1) << ". " << plan.trace[i] << "\n";
    const Exchange ex = ask(
        p, "discriminate",
        config_.prompt("discriminate", {{"prompt", p.prompt}, {"steps", steps.str()}}));
    std::string reply = lower(ex.response);
    const std::size_t start = reply.find_first_not_of(" \t\r\n");
    if (start == std::string::npos || reply.compare(start, 4, "pass") != 0)
      d.reasons.push_back("backend coherence check: " + first_line(ex.response));
  }

  d.pass = d.reasons.empty();
  log_stage(p.id, "discriminate", {{"pass", d.pass}, {"reasons", d.reasons}});
  return d;
}

std::vector<ActionStep> Pipeline::generate_actions(const GroundedPlan& g) {
  if (g.kinds.empty()) throw AgentError("grounded plan has an empty action schema");
  std::vector<ActionStep> out;
  std::size_t i = 0;
  for (ActionKind k : g.kinds) {
    ActionStep s;
    s.kind = k;
    const std::size_t needs = k == ActionKind::Drag ? 2 : 1;
    if (i + needs > g.coordinates.size())
      throw AgentError("not enough grounded coordinates for the action schema");
    s.coordinate = g.coordinates[i];
    if (k == ActionKind::Drag) s.end = g.coordinates[i + 1];
    i += needs;
    out.push_back(s);
  }
  if (i != g.coordinates.size())
    throw AgentError("grounded coordinates left over after action generation");
  return out;
}

ExecutionResult Pipeline::execute_simulated(const std::vector<ActionStep>& actions,
                                            const Puzzle& p) {
  ExecutionResult r;
  r.puzzle_id = p.id;
  r.steps = actions;
  r.verdict = sequence_verdict(actions, p);
  r.solved = r.verdict.matched;
  json steps_json = json::array();
  for (const ActionStep& s : actions) steps_json.push_back(action_step_to_json(s));
  log_stage(p.id, "execute", {{"solved", r.solved}, {"steps", steps_json}});
  return r;
}

// ===== Orchestration =====

PuzzleOutcome Pipeline::run_puzzle(const Puzzle& p) {
  PuzzleOutcome out;
  out.puzzle_id = p.id;
  out.category = p.category;
  try {
    out.decision = judge_category(p);
    StageContext ctx;
    ctx.branch = out.decision.branch;

    if (ctx.branch == Branch::Grid) {
      ctx.grid = map_to_grid(p);
      switch (p.category) {
        case Category::Gobang: {
          if (!p.board->player_symbol)
            throw AgentError("puzzle " + p.id + " has no player symbol");
          const std::optional<CellRef> cell = solve_gobang(
              *ctx.grid, *p.board->player_symbol, config_.gobang_run_length);
          if (!cell) throw AgentError("puzzle " + p.id + ": no winning cell exists");
          ctx.solver_targets = {*cell};
          ctx.solver_note = "place at " + cell_text(*cell) + " to complete " +
                            std::to_string(config_.gobang_run_length) + " in a row";
          break;
        }
        case Category::IconCrush: {
          const std::optional<SwapMove> swap = solve_match3(*ctx.grid);
          if (!swap)
            throw AgentError("puzzle " + p.id + ": no run-creating swap exists");
          ctx.solver_targets = {swap->a, swap->b};
          ctx.solver_note =
              "swap " + cell_text(swap->a) + " with " + cell_text(swap->b);
          break;
        }
        case Category::Recaptcha: {
          if (!p.board->target_symbol)
            throw AgentError("puzzle " + p.id + " has no target symbol");
          ctx.solver_targets = solve_select_all(*ctx.grid, *p.board->target_symbol);
          if (ctx.solver_targets.empty())
            throw AgentError("puzzle " + p.id + ": target symbol '" +
                             *p.board->target_symbol + "' absent from the board");
          ctx.solver_note = "select every '" + *p.board->target_symbol +
                            "' cell in row-major order";
          break;
        }
        default:
          // Routed to the grid branch without a dedicated solver; the backend
          // must supply the target cells.
          break;
      }
    }

    GroundedPlan grounded;
    Discrimination disc;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const ReasoningPlan plan = generate_reasoning(p, ctx);
      grounded = spatial_ground(plan, p, ctx);
      disc = discriminate(grounded, p, ctx);
      if (disc.pass) break;
    }
    out.plan = grounded;
    out.discrimination = disc;
    if (!disc.pass) {
      out.error = "discriminator rejected the plan: " + join(disc.reasons, "; ");
      return out;
    }

    const std::vector<ActionStep> actions = generate_actions(grounded);
    out.execution = execute_simulated(actions, p);
    out.solved = out.execution->solved;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

RunSummary Pipeline::run(const Corpus& corpus) {
  if (root_.empty() && !corpus.dir.empty()) root_ = corpus.dir;
  clear_log();

  RunSummary summary;
  summary.total = static_cast<int>(corpus.puzzles.size());
  summary.outcomes.resize(corpus.puzzles.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= corpus.puzzles.size()) return;
      summary.outcomes[i] = run_puzzle(corpus.puzzles[i]);
    }
  };
  const int workers =
      std::max(1, std::min(config_.max_concurrency, summary.total));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  sort_log(corpus);

  for (const PuzzleOutcome& o : summary.outcomes) {
    if (o.solved) ++summary.solved_count;
    if (o.execution) {
      PredictionRecord rec;
      rec.model_id = config_.model_id;
      rec.puzzle_id = o.puzzle_id;
      rec.condition = Condition::WithReasoning;
      rec.predicted = o.execution->steps;
      if (o.plan) rec.trace = o.plan->plan.trace;
      summary.predictions.push_back(std::move(rec));
    }
  }
  return summary;
}

// ===== Outcome serialization =====

json PuzzleOutcome::to_json() const {
  json j;
  j["puzzle_id"] = puzzle_id;
  j["category"] = to_string(category);
  j["branch"] = to_string(decision.branch);
  j["confidence"] = decision.confidence;
  j["rationale"] = decision.rationale;
  j["discriminator_pass"] = discrimination.pass;
  j["discriminator_reasons"] = discrimination.reasons;
  j["solved"] = solved;
  j["error"] = error ? json(*error) : json(nullptr);
  if (execution) {
    json steps = json::array();
    for (const ActionStep& s : execution->steps) steps.push_back(action_step_to_json(s));
    j["steps"] = steps;
  }
  if (plan) j["trace"] = plan->plan.trace;
  return j;
}

}  // namespace capbench
