#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <memory>
#include <string>

#include "capbench/agent.hpp"
#include "capbench/fixturegen.hpp"
#include "capbench/ioutil.hpp"
#include "capbench/metrics.hpp"
#include "capbench/modelclient.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace capbench;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("capbench-pipe-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string fenced_steps(const std::vector<std::string>& steps,
                         const json& extra = json::object()) {
  json j = extra;
  j["steps"] = steps;
  return "```json\n" + j.dump() + "\n```";
}

Puzzle gobang_puzzle() {
  Puzzle p;
  p.id = "gobang-t1";
  p.category = Category::Gobang;
  p.image_path = "images/gobang-t1.png";
  p.image_w = 420;
  p.image_h = 420;
  p.prompt = "Place the stone that completes five in a row for x.";
  BoardInfo b;
  b.origin = {30, 30};
  b.cell_w = 40;
  b.cell_h = 40;
  b.rows = 9;
  b.cols = 9;
  b.symbols.assign(81, ".");
  b.symbols[9 * 4 + 2] = "x";
  b.symbols[9 * 4 + 3] = "x";
  b.symbols[9 * 4 + 4] = "x";
  b.symbols[9 * 4 + 6] = "x";  // gap at (4, 5)
  b.player_symbol = "x";
  p.board = b;
  TruthStep s;
  s.region = Region::box({30 + 5 * 40, 30 + 4 * 40}, {30 + 6 * 40, 30 + 5 * 40});
  p.truth = {s};
  return p;
}

std::string board_bracket(const Puzzle& p) {
  return SymbolGrid::from_board(*p.board).to_bracket_text();
}

Puzzle icon_puzzle() {
  Puzzle p;
  p.id = "icon-t1";
  p.category = Category::Icon;
  p.image_path = "images/icon-t1.png";
  p.image_w = 320;
  p.image_h = 240;
  p.prompt = "Click the star.";
  TruthStep s;
  s.region = Region::circle({120, 90}, 22);
  p.truth = {s};
  return p;
}

}  // namespace

// ===== Symbol grids =====

TEST_CASE("bracket text parses into a rectangular grid") {
  const SymbolGrid g = SymbolGrid::parse("[a,a,a; b,b,c; c,b,b]");
  CHECK(g.rows == 3);
  CHECK(g.cols == 3);
  CHECK(g.at(0, 0) == "a");
  CHECK(g.at(1, 2) == "c");
  CHECK(g.at(2, 1) == "b");
  CHECK(g.to_bracket_text() == "[a,a,a; b,b,c; c,b,b]");

  const SymbolGrid spaced = SymbolGrid::parse("  [ x , . ; . , o ]  ");
  CHECK(spaced.rows == 2);
  CHECK(spaced.at(0, 0) == "x");
  CHECK(spaced.at(1, 1) == "o");
}

TEST_CASE("parse failures distinguish formatting from shape") {
  CHECK_THROWS_AS(SymbolGrid::parse("a,a; b,b"), GridParseError);     // no brackets
  CHECK_THROWS_AS(SymbolGrid::parse("[a,,b; c,d,e]"), GridParseError);  // empty cell
  CHECK_THROWS_AS(SymbolGrid::parse("[]"), GridParseError);
  CHECK_THROWS_AS(SymbolGrid::parse("[a,a,a; b,b,b; c,c]"), GridShapeError);
  CHECK_THROWS_AS(SymbolGrid::parse("[a; b,c]"), GridShapeError);
}

TEST_CASE("grids built from board annotations carry the pixel lattice") {
  const Puzzle p = gobang_puzzle();
  const SymbolGrid g = SymbolGrid::from_board(*p.board);
  CHECK(g.rows == 9);
  CHECK(g.at(4, 2) == "x");
  const Point center = g.cell_center(4, 5);
  CHECK(center.x == doctest::Approx(30 + 5.5 * 40));
  CHECK(center.y == doctest::Approx(30 + 4.5 * 40));
  CHECK(g.in_bounds({8, 8}));
  CHECK_FALSE(g.in_bounds({9, 0}));
  CHECK_FALSE(g.in_bounds({0, -1}));
}

// ===== Routing =====

TEST_CASE("board-based categories route to the grid branch by default") {
  CHECK(default_branch(Category::Gobang) == Branch::Grid);
  CHECK(default_branch(Category::IconCrush) == Branch::Grid);
  CHECK(default_branch(Category::Recaptcha) == Branch::Grid);
  CHECK(default_branch(Category::Icon) == Branch::NonGrid);
  CHECK(default_branch(Category::SpaceReasoning) == Branch::NonGrid);
  CHECK(default_branch(Category::Hcaptcha) == Branch::NonGrid);
  CHECK(default_branch(Category::Vtt) == Branch::NonGrid);
}

TEST_CASE("branch overrides rewire a category") {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.branch_overrides[Category::Icon] = Branch::Grid;
  CHECK(cfg.branch_for(Category::Icon) == Branch::Grid);
  CHECK(cfg.branch_for(Category::Hcaptcha) == Branch::NonGrid);

  const PipelineConfig parsed = PipelineConfig::from_json(
      json{{"branch_overrides", {{"Icon", "grid"}}}});
  CHECK(parsed.branch_for(Category::Icon) == Branch::Grid);

  CHECK_THROWS_AS(PipelineConfig::from_json(
                      json{{"branch_overrides", {{"Icon", "sideways"}}}}),
                  AgentError);
  CHECK_THROWS_AS(PipelineConfig::from_json(
                      json{{"branch_overrides", {{"NotACategory", "grid"}}}}),
                  AgentError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"max_concurrency", 0}}),
                  AgentError);
  CHECK_THROWS_AS(
      PipelineConfig::from_json(json{{"min_trace_steps", 5}, {"max_trace_steps", 2}}),
      AgentError);
}

TEST_CASE("prompt templates substitute every occurrence of a field") {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.prompts["category"] = "{prompt} -- again: {prompt}";
  CHECK(cfg.prompt("category", {{"prompt", "Click it."}}) ==
        "Click it. -- again: Click it.");
  CHECK_THROWS_AS(cfg.prompt("no-such-stage", {}), AgentError);
}

TEST_CASE("rules-based category judging never consults the backend") {
  // An empty scripted backend throws on any request, so this passing proves
  // no request was made.
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  const CategoryDecision d = pipeline.judge_category(icon_puzzle());
  CHECK(d.branch == Branch::NonGrid);
  CHECK(d.confidence == doctest::Approx(1.0));
  CHECK(d.rationale.find("Icon") != std::string::npos);
}

TEST_CASE("backend category judging can overrule the default route") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script("icon-t1", "category", "non_grid, clearly free-form");
  backend->add_script("gobang-t1", "category", "grid");
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.backend_category_judge = true;
  Pipeline pipeline(backend, cfg);
  CHECK(pipeline.judge_category(icon_puzzle()).branch == Branch::NonGrid);
  CHECK(pipeline.judge_category(gobang_puzzle()).branch == Branch::Grid);
}

// ===== Mapping =====

TEST_CASE("map_to_grid keeps backend symbols but board geometry") {
  const Puzzle p = gobang_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "map", board_bracket(p));
  Pipeline pipeline(backend, PipelineConfig::defaults());
  const SymbolGrid g = pipeline.map_to_grid(p);
  CHECK(g.rows == 9);
  CHECK(g.cell_w == doctest::Approx(40));
  CHECK(g.origin.x == doctest::Approx(30));
  CHECK(g.at(4, 6) == "x");
}

TEST_CASE("an unparseable map reply earns one re-prompt") {
  const Puzzle p = gobang_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "map", "sorry, I cannot");
  backend->add_script(p.id, "map", board_bracket(p));
  Pipeline pipeline(backend, PipelineConfig::defaults());
  CHECK(pipeline.map_to_grid(p).rows == 9);

  auto hopeless = std::make_shared<ScriptedBackend>();
  hopeless->add_script(p.id, "map", "no");
  Pipeline stuck(hopeless, PipelineConfig::defaults());
  CHECK_THROWS_AS(stuck.map_to_grid(p), AgentError);
}

TEST_CASE("a wrong-shape map reply is a hard error, not a formatting slip") {
  const Puzzle p = gobang_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "map", "[a,b; c,d]");  // 2x2 against a 9x9 board
  Pipeline pipeline(backend, PipelineConfig::defaults());
  CHECK_THROWS_AS(pipeline.map_to_grid(p), GridShapeError);
}

TEST_CASE("map_to_grid requires a board annotation") {
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  CHECK_THROWS_AS(pipeline.map_to_grid(icon_puzzle()), AgentError);
}

// ===== Reasoning and grounding =====

TEST_CASE("solver targets are authoritative over narrated cells") {
  const Puzzle p = gobang_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  // The narrated JSON even claims a different cell; the solver's answer wins.
  backend->add_script(p.id, "reason",
                      fenced_steps({"Four x stones sit on row 4.",
                                    "The gap at (4, 5) completes five."},
                                   json{{"cells", json::array({json::array({0, 0})})}}));
  Pipeline pipeline(backend, PipelineConfig::defaults());

  StageContext ctx;
  ctx.branch = Branch::Grid;
  ctx.grid = SymbolGrid::from_board(*p.board);
  ctx.solver_targets = {{4, 5}};
  ctx.solver_note = "place at (4, 5)";

  const ReasoningPlan plan = pipeline.generate_reasoning(p, ctx);
  CHECK(plan.branch == Branch::Grid);
  CHECK(plan.trace.size() == 2);
  REQUIRE(plan.target_cells.size() == 1);
  CHECK(plan.target_cells[0] == CellRef{4, 5});

  const GroundedPlan grounded = pipeline.spatial_ground(plan, p, ctx);
  REQUIRE(grounded.coordinates.size() == 1);
  CHECK(grounded.coordinates[0].x == doctest::Approx(30 + 5.5 * 40));
  CHECK(grounded.coordinates[0].y == doctest::Approx(30 + 4.5 * 40));
  REQUIRE(grounded.kinds.size() == 1);
  CHECK(grounded.kinds[0] == ActionKind::Click);
}

TEST_CASE("grid reasoning without a solver takes cells from the backend") {
  Puzzle p = gobang_puzzle();
  p.category = Category::SpaceReasoning;  // grid-routed but no dedicated solver
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "reason",
                      fenced_steps({"The queried cell is (2, 3)."},
                                   json{{"cells", json::array({json::array({2, 3})})}}));
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.branch_overrides[Category::SpaceReasoning] = Branch::Grid;
  Pipeline pipeline(backend, cfg);

  StageContext ctx;
  ctx.branch = Branch::Grid;
  ctx.grid = SymbolGrid::from_board(*p.board);
  const ReasoningPlan plan = pipeline.generate_reasoning(p, ctx);
  REQUIRE(plan.target_cells.size() == 1);
  CHECK(plan.target_cells[0] == CellRef{2, 3});
}

TEST_CASE("non-grid reasoning extracts steps and target descriptions") {
  const Puzzle p = icon_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "reason",
                      fenced_steps({"Scan for the star.", "It sits near the center."},
                                   json{{"targets", json::array({"the star icon"})}}));
  backend->add_script(p.id, "ground", "```json\n{\"coordinates\": [[120, 90]]}\n```");
  Pipeline pipeline(backend, PipelineConfig::defaults());

  StageContext ctx;  // defaults to the non-grid branch
  const ReasoningPlan plan = pipeline.generate_reasoning(p, ctx);
  CHECK(plan.branch == Branch::NonGrid);
  REQUIRE(plan.target_descriptions.size() == 1);
  CHECK(plan.target_descriptions[0] == "the star icon");

  const GroundedPlan grounded = pipeline.spatial_ground(plan, p, ctx);
  REQUIRE(grounded.coordinates.size() == 1);
  CHECK(grounded.coordinates[0].x == doctest::Approx(120));
}

TEST_CASE("a malformed reasoning reply earns one re-prompt then fails") {
  const Puzzle p = icon_puzzle();
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_script(p.id, "reason", "no json at all");
  backend->add_script(p.id, "reason",
                      fenced_steps({"Found it."},
                                   json{{"targets", json::array({"the star"})}}));
  Pipeline pipeline(backend, PipelineConfig::defaults());
  StageContext ctx;
  CHECK(pipeline.generate_reasoning(p, ctx).trace.size() == 1);

  auto hopeless = std::make_shared<ScriptedBackend>();
  hopeless->add_script(p.id, "reason", "still nothing");
  Pipeline stuck(hopeless, PipelineConfig::defaults());
  CHECK_THROWS_AS(stuck.generate_reasoning(p, ctx), AgentError);
}

TEST_CASE("grounding replies must give one in-bounds point per target") {
  const Puzzle p = icon_puzzle();
  StageContext ctx;
  ReasoningPlan plan;
  plan.branch = Branch::NonGrid;
  plan.trace = {"Looking."};
  plan.target_descriptions = {"the star"};

  auto backend = std::make_shared<ScriptedBackend>();
  // Wrong count, then out of bounds, then acceptable; only two attempts are
  // granted so the pipeline must fail on the first pair.
  backend->add_script(p.id, "ground",
                      "```json\n{\"coordinates\": [[1, 1], [2, 2]]}\n```");
  backend->add_script(p.id, "ground",
                      "```json\n{\"coordinates\": [[9999, 90]]}\n```");
  Pipeline pipeline(backend, PipelineConfig::defaults());
  CHECK_THROWS_AS(pipeline.spatial_ground(plan, p, ctx), AgentError);

  auto recovering = std::make_shared<ScriptedBackend>();
  recovering->add_script(p.id, "ground", "not parseable");
  recovering->add_script(p.id, "ground", "```json\n{\"coordinates\": [[120, 90]]}\n```");
  Pipeline second(recovering, PipelineConfig::defaults());
  CHECK(second.spatial_ground(plan, p, ctx).coordinates.size() == 1);
}

TEST_CASE("grounding a cell outside the grid is rejected outright") {
  const Puzzle p = gobang_puzzle();
  StageContext ctx;
  ctx.branch = Branch::Grid;
  ctx.grid = SymbolGrid::from_board(*p.board);
  ReasoningPlan plan;
  plan.branch = Branch::Grid;
  plan.trace = {"step"};
  plan.target_cells = {{12, 0}};
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  CHECK_THROWS_AS(pipeline.spatial_ground(plan, p, ctx), AgentError);
}

// ===== Discrimination and actions =====

TEST_CASE("the discriminator reports every structural failure it finds") {
  const Puzzle p = gobang_puzzle();
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  StageContext ctx;
  ctx.branch = Branch::Grid;
  ctx.grid = SymbolGrid::from_board(*p.board);
  ctx.solver_targets = {{4, 5}};

  GroundedPlan ok;
  ok.plan.branch = Branch::Grid;
  ok.plan.trace = {"a", "b"};
  ok.plan.target_cells = {{4, 5}};
  ok.coordinates = {{250, 210}};
  ok.kinds = {ActionKind::Click};
  CHECK(pipeline.discriminate(ok, p, ctx).pass);

  GroundedPlan empty_trace = ok;
  empty_trace.plan.trace.clear();
  const Discrimination d1 = pipeline.discriminate(empty_trace, p, ctx);
  CHECK_FALSE(d1.pass);
  CHECK(d1.reasons.size() == 1);
  CHECK(d1.reasons[0].find("empty reasoning trace") != std::string::npos);

  GroundedPlan wrong_cell = ok;
  wrong_cell.plan.target_cells = {{0, 0}};
  const Discrimination d2 = pipeline.discriminate(wrong_cell, p, ctx);
  CHECK_FALSE(d2.pass);
  CHECK(d2.reasons[0].find("target-solver mismatch") != std::string::npos);

  GroundedPlan stray = ok;
  stray.coordinates = {{5000, 210}};
  CHECK_FALSE(pipeline.discriminate(stray, p, ctx).pass);

  GroundedPlan short_coords = ok;
  short_coords.kinds = {ActionKind::Drag};  // needs two points, has one
  const Discrimination d3 = pipeline.discriminate(short_coords, p, ctx);
  CHECK_FALSE(d3.pass);
  CHECK(d3.reasons[0].find("coordinates") != std::string::npos);

  PipelineConfig tight = PipelineConfig::defaults();
  tight.max_trace_steps = 1;
  Pipeline strict(std::make_shared<ScriptedBackend>(), tight);
  CHECK_FALSE(strict.discriminate(ok, p, ctx).pass);
}

TEST_CASE("an optional backend coherence check can veto the plan") {
  const Puzzle p = icon_puzzle();
  StageContext ctx;
  GroundedPlan plan;
  plan.plan.branch = Branch::NonGrid;
  plan.plan.trace = {"step"};
  plan.coordinates = {{120, 90}};
  plan.kinds = {ActionKind::Click};

  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.backend_discriminator = true;

  auto approving = std::make_shared<ScriptedBackend>();
  approving->add_script(p.id, "discriminate", "PASS - coherent plan");
  CHECK(Pipeline(approving, cfg).discriminate(plan, p, ctx).pass);

  auto vetoing = std::make_shared<ScriptedBackend>();
  vetoing->add_script(p.id, "discriminate", "fail: the steps skip the search");
  const Discrimination d = Pipeline(vetoing, cfg).discriminate(plan, p, ctx);
  CHECK_FALSE(d.pass);
  REQUIRE(d.reasons.size() == 1);
  CHECK(d.reasons[0].find("coherence") != std::string::npos);
}

TEST_CASE("action generation pairs coordinates with the schema") {
  GroundedPlan g;
  g.plan.trace = {"t"};
  g.kinds = {ActionKind::Click, ActionKind::Drag};
  g.coordinates = {{10, 10}, {20, 20}, {30, 30}};
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  const std::vector<ActionStep> steps = pipeline.generate_actions(g);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].kind == ActionKind::Click);
  CHECK_FALSE(steps[0].end.has_value());
  CHECK(steps[1].kind == ActionKind::Drag);
  CHECK(steps[1].coordinate.x == doctest::Approx(20));
  REQUIRE(steps[1].end.has_value());
  CHECK(steps[1].end->x == doctest::Approx(30));

  GroundedPlan starved = g;
  starved.coordinates = {{10, 10}};
  CHECK_THROWS_AS(pipeline.generate_actions(starved), AgentError);

  GroundedPlan leftover = g;
  leftover.kinds = {ActionKind::Click};
  CHECK_THROWS_AS(pipeline.generate_actions(leftover), AgentError);
}

TEST_CASE("simulated execution scores exactly like the metric layer") {
  const Puzzle p = gobang_puzzle();
  const std::vector<ActionStep> actions = {
      [] {
        ActionStep s;
        s.coordinate = {30 + 5.5 * 40, 30 + 4.5 * 40};
        return s;
      }(),
  };
  Pipeline pipeline(std::make_shared<ScriptedBackend>(), PipelineConfig::defaults());
  const ExecutionResult r = pipeline.execute_simulated(actions, p);
  CHECK(r.solved);
  CHECK(r.verdict.matched == sequence_verdict(actions, p).matched);
  CHECK(r.solved == sequence_match(actions, p));
}

// ===== Fixture integration =====

TEST_CASE("a generated fixture corpus solves end to end, deterministically") {
  TempDir dir;
  FixtureSpec spec;
  spec.count = 14;  // two per category
  spec.seed = 41;
  const Corpus corpus = generate_fixture_corpus(dir.path.string(), spec);
  REQUIRE(corpus.puzzles.size() == 14);
  CHECK_FALSE(has_errors(validate_corpus(corpus)));

  const auto backend = ScriptedBackend::from_file(dir.path / "script.jsonl");
  Pipeline pipeline(backend, PipelineConfig::defaults());
  const RunSummary summary = pipeline.run(corpus);
  CHECK(summary.total == 14);
  CHECK(summary.solved_count == 14);
  CHECK(summary.solve_rate() == doctest::Approx(1.0));
  REQUIRE(summary.predictions.size() == 14);
  for (const PredictionRecord& rec : summary.predictions) {
    REQUIRE(rec.trace.has_value());
    CHECK_FALSE(rec.trace->empty());
    CHECK(rec.model_id == "agent");
  }
  for (const PuzzleOutcome& o : summary.outcomes) {
    CHECK(o.solved);
    CHECK_FALSE(o.error.has_value());
    CHECK(o.discrimination.pass);
  }

  // Trace logs are sorted into corpus order and byte-stable across runs.
  const fs::path log1 = dir.path / "log1.jsonl";
  const fs::path log2 = dir.path / "log2.jsonl";
  pipeline.write_trace_log(log1);
  const auto backend2 = ScriptedBackend::from_file(dir.path / "script.jsonl");
  Pipeline again(backend2, PipelineConfig::defaults());
  const RunSummary second = again.run(corpus);
  CHECK(second.solved_count == 14);
  again.write_trace_log(log2);
  CHECK(read_text_file(log1.string()) == read_text_file(log2.string()));

  // A single-threaded run lands on the same outcomes.
  PipelineConfig serial = PipelineConfig::defaults();
  serial.max_concurrency = 1;
  Pipeline one(ScriptedBackend::from_file(dir.path / "script.jsonl"), serial);
  const RunSummary third = one.run(corpus);
  CHECK(third.solved_count == 14);
  const fs::path log3 = dir.path / "log3.jsonl";
  one.write_trace_log(log3);
  CHECK(read_text_file(log3.string()) == read_text_file(log1.string()));
}

TEST_CASE("a sabotaged truth region surfaces as unsolved, not as an error") {
  TempDir dir;
  FixtureSpec spec;
  spec.count = 7;
  const Corpus corpus = generate_fixture_corpus(dir.path.string(), spec);
  Corpus broken = corpus;
  // Push the first puzzle's first region far away so the plan misses it.
  Region& r = broken.puzzles[0].truth[0].region;
  r = Region::circle({5.0, 5.0}, 1.0);

  Pipeline pipeline(ScriptedBackend::from_file(dir.path / "script.jsonl"),
                    PipelineConfig::defaults());
  const RunSummary summary = pipeline.run(broken);
  CHECK(summary.solved_count == 6);
  CHECK_FALSE(summary.outcomes[0].solved);
  CHECK_FALSE(summary.outcomes[0].error.has_value());  // executed, just missed
}
