#include "capbench/fixturegen.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capbench/agent.hpp"
#include "capbench/ioutil.hpp"
#include "capbench/rng.hpp"

namespace fs = std::filesystem;

namespace capbench {

using nlohmann::json;

namespace {

// 1x1 grayscale PNG; the corpus only checks that image files exist, so every
// fixture puzzle shares these placeholder bytes.
const unsigned char kPngBytes[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49,
    0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00,
    0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44,
    0x41, 0x54, 0x78, 0xda, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0xda,
    0x45, 0x08, 0x3b, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42,
    0x60, 0x82};

struct ScriptWriter {
  std::string text;

  void add(const std::string& puzzle_id, const std::string& stage,
           const std::string& reply) {
    json j;
    j["puzzle_id"] = puzzle_id;
    j["stage"] = stage;
    j["reply"] = reply;
    text += j.dump() + "\n";
  }
};

std::string fenced(const json& block) {
  return "```json\n" + block.dump() + "\n```\n";
}

std::string lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return s;
}

Region cell_box(const BoardInfo& b, int r, int c) {
  const Point mn{b.origin.x + c * b.cell_w, b.origin.y + r * b.cell_h};
  const Point mx{mn.x + b.cell_w, mn.y + b.cell_h};
  return Region::box(mn, mx);
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);
  return idx;
}

// Free-form puzzles place regions on a coarse slot lattice so they never
// overlap and every coordinate is a whole pixel.
Point slot_center(int slot) {
  static const double xs[] = {60, 160, 260};
  static const double ys[] = {60, 120, 180};
  return {xs[slot % 3], ys[slot / 3]};
}

// ===== Board authoring =====

BoardInfo author_gobang_board(Rng& rng, CellRef& win_cell) {
  BoardInfo b;
  b.rows = b.cols = 9;
  b.origin = {30, 30};
  b.cell_w = b.cell_h = 40;
  b.empty_symbol = ".";
  b.player_symbol = "x";
  b.symbols.assign(81, ".");

  // Four player stones on a five-cell window with an interior gap: the gap is
  // then the only cell completing five in a row.
  static const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  const int* d = dirs[rng.uniform_int(0, 3)];
  int r0, c0;
  for (;;) {
    r0 = rng.uniform_int(0, 8);
    c0 = rng.uniform_int(0, 8);
    const int r4 = r0 + 4 * d[0], c4 = c0 + 4 * d[1];
    if (r4 >= 0 && r4 < 9 && c4 >= 0 && c4 < 9) break;
  }
  const int gap = rng.uniform_int(1, 3);
  for (int i = 0; i < 5; ++i) {
    const int r = r0 + i * d[0], c = c0 + i * d[1];
    if (i == gap)
      win_cell = {r, c};
    else
      b.symbols[r * 9 + c] = "x";
  }

  int placed = 0;
  while (placed < 6) {
    const int r = rng.uniform_int(0, 8), c = rng.uniform_int(0, 8);
    if (b.symbols[r * 9 + c] == "." && !(r == win_cell.row && c == win_cell.col)) {
      b.symbols[r * 9 + c] = "o";
      ++placed;
    }
  }

  const std::optional<CellRef> check =
      solve_gobang(SymbolGrid::from_board(b), "x", 5);
  if (!check || !(*check == win_cell))
    throw std::logic_error("gobang fixture authoring produced a non-unique win");
  return b;
}

BoardInfo author_match3_board(Rng& rng, SwapMove& swap) {
  BoardInfo b;
  b.rows = b.cols = 4;
  b.origin = {40, 40};
  b.cell_w = b.cell_h = 80;
  b.empty_symbol = ".";
  static const char* symbols[] = {"a", "b", "c"};
  for (int attempt = 0; attempt < 1000; ++attempt) {
    b.symbols.clear();
    for (int i = 0; i < 16; ++i) b.symbols.push_back(symbols[rng.uniform_int(0, 2)]);
    const std::optional<SwapMove> found = solve_match3(SymbolGrid::from_board(b));
    if (found) {
      swap = *found;
      return b;
    }
  }
  throw std::logic_error("match-3 fixture authoring found no solvable board");
}

BoardInfo author_select_board(Rng& rng, std::vector<CellRef>& targets) {
  BoardInfo b;
  b.rows = b.cols = 4;
  b.origin = {40, 40};
  b.cell_w = b.cell_h = 100;
  b.empty_symbol = ".";
  b.target_symbol = "car";
  static const char* fillers[] = {"tree", "bus", "fire"};
  for (int i = 0; i < 16; ++i) b.symbols.push_back(fillers[rng.uniform_int(0, 2)]);
  const int k = rng.uniform_int(2, 4);
  std::vector<int> idx = shuffled_indices(16, rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());  // row-major, matching the selection order
  targets.clear();
  for (int i : idx) {
    b.symbols[i] = "car";
    targets.push_back({i / 4, i % 4});
  }
  return b;
}

// ===== Per-category puzzle authoring =====

struct Authored {
  Puzzle puzzle;
  std::vector<std::pair<std::string, std::string>> script;  // stage -> reply
};

json steps_block(const ReasoningTrace& steps) { return json{{"steps", steps}}; }

Authored author_gobang(const std::string& id, Rng& rng) {
  Authored a;
  CellRef win;
  const BoardInfo board = author_gobang_board(rng, win);
  a.puzzle.id = id;
  a.puzzle.category = Category::Gobang;
  a.puzzle.image_w = a.puzzle.image_h = 480;
  a.puzzle.prompt = "Place the next x stone to complete five in a row.";
  a.puzzle.board = board;
  a.puzzle.truth = {{ActionKind::Click, cell_box(board, win.row, win.col), std::nullopt}};

  const ReasoningTrace steps = {
      "Scan every row, column, and diagonal for four x stones broken by one empty cell.",
      "The line through row " + std::to_string(win.row) + ", column " +
          std::to_string(win.col) + " holds four x stones with that single gap.",
      "Placing x at (" + std::to_string(win.row) + ", " + std::to_string(win.col) +
          ") completes five in a row, so click that cell."};
  a.puzzle.reference_reasoning = steps;
  a.script = {{"map", SymbolGrid::from_board(board).to_bracket_text()},
              {"reason", fenced(steps_block(steps))}};
  return a;
}

Authored author_match3(const std::string& id, Rng& rng) {
  Authored a;
  SwapMove swap;
  const BoardInfo board = author_match3_board(rng, swap);
  a.puzzle.id = id;
  a.puzzle.category = Category::IconCrush;
  a.puzzle.image_w = a.puzzle.image_h = 480;
  a.puzzle.prompt = "Swap two adjacent icons so three identical icons line up.";
  a.puzzle.board = board;
  TruthStep drag;
  drag.kind = ActionKind::Drag;
  drag.region = cell_box(board, swap.b.row, swap.b.col);
  drag.start_region = cell_box(board, swap.a.row, swap.a.col);
  a.puzzle.truth = {drag};

  const auto cell_name = [](const CellRef& c) {
    return "(" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")";
  };
  const ReasoningTrace steps = {
      "Try each adjacent pair of differing icons in reading order.",
      "Swapping " + cell_name(swap.a) + " with " + cell_name(swap.b) +
          " lines up three identical icons through the swapped cell.",
      "Drag the icon at " + cell_name(swap.a) + " onto " + cell_name(swap.b) + "."};
  a.puzzle.reference_reasoning = steps;
  a.script = {{"map", SymbolGrid::from_board(board).to_bracket_text()},
              {"reason", fenced(steps_block(steps))}};
  return a;
}

Authored author_select(const std::string& id, Rng& rng) {
  Authored a;
  std::vector<CellRef> targets;
  const BoardInfo board = author_select_board(rng, targets);
  a.puzzle.id = id;
  a.puzzle.category = Category::Recaptcha;
  a.puzzle.image_w = a.puzzle.image_h = 480;
  a.puzzle.prompt = "Select all squares containing a car.";
  a.puzzle.board = board;
  for (const CellRef& t : targets)
    a.puzzle.truth.push_back({ActionKind::Click, cell_box(board, t.row, t.col),
                              std::nullopt});

  ReasoningTrace steps = {"Check each of the 16 squares for a car, top left to bottom "
                          "right."};
  for (const CellRef& t : targets)
    steps.push_back("Row " + std::to_string(t.row) + ", column " + std::to_string(t.col) +
                    " shows a car; select it.");
  a.puzzle.reference_reasoning = steps;
  a.script = {{"map", SymbolGrid::from_board(board).to_bracket_text()},
              {"reason", fenced(steps_block(steps))}};
  return a;
}

Authored author_icon(const std::string& id, Rng& rng) {
  Authored a;
  a.puzzle.id = id;
  a.puzzle.category = Category::Icon;
  a.puzzle.image_w = 320;
  a.puzzle.image_h = 240;

  static const char* names[] = {"star", "heart", "diamond", "bell", "leaf"};
  const int m = rng.uniform_int(2, 3);
  std::vector<int> name_idx = shuffled_indices(5, rng);
  std::vector<int> slots = shuffled_indices(9, rng);

  std::string order;
  ReasoningTrace steps = {"Find each named icon in the image, then click them in the "
                          "order the prompt lists."};
  std::vector<std::string> targets;
  json coords = json::array();
  for (int i = 0; i < m; ++i) {
    const std::string name = names[name_idx[i]];
    const Point center = slot_center(slots[i]);
    a.puzzle.truth.push_back({ActionKind::Click, Region::circle(center, 22),
                              std::nullopt});
    order += (i ? ", " : "") + name;
    targets.push_back("the " + name + " icon");
    steps.push_back("The " + name + " icon sits near (" +
                    std::to_string(int(center.x)) + ", " + std::to_string(int(center.y)) +
                    ").");
    coords.push_back(point_to_json(center));
  }
  a.puzzle.prompt = "Click the icons in this order: " + order + ".";
  a.puzzle.reference_reasoning = steps;
  a.script = {{"reason", fenced(json{{"steps", steps}, {"targets", targets}})},
              {"ground", fenced(json{{"coordinates", coords}})}};
  return a;
}

Authored author_space(const std::string& id, Rng& rng) {
  Authored a;
  a.puzzle.id = id;
  a.puzzle.category = Category::SpaceReasoning;
  a.puzzle.image_w = 320;
  a.puzzle.image_h = 240;

  static const char* descriptions[] = {
      "the cube to the left of the sphere", "the cone behind the cylinder",
      "the smallest of the three blocks", "the object casting the longer shadow"};
  const std::string what = descriptions[rng.uniform_int(0, 3)];
  const Point center = slot_center(rng.uniform_int(0, 8));
  const Region region =
      Region::box({center.x - 25, center.y - 20}, {center.x + 25, center.y + 20});
  a.puzzle.prompt = "Click " + what + ".";
  a.puzzle.truth = {{ActionKind::Click, region, std::nullopt}};

  const ReasoningTrace steps = {
      "Identify every candidate object and its spatial relation to the others.",
      "Only one object satisfies the description: " + what + ".",
      "It is centered near (" + std::to_string(int(center.x)) + ", " +
          std::to_string(int(center.y)) + "); click there."};
  a.puzzle.reference_reasoning = steps;
  a.script = {{"reason", fenced(json{{"steps", steps}, {"targets", {what}}})},
              {"ground", fenced(json{{"coordinates", json::array({point_to_json(center)})}})}};
  return a;
}

Authored author_hcaptcha(const std::string& id, Rng& rng) {
  Authored a;
  a.puzzle.id = id;
  a.puzzle.category = Category::Hcaptcha;
  a.puzzle.image_w = 320;
  a.puzzle.image_h = 240;

  std::vector<int> slots = shuffled_indices(9, rng);
  const Point piece = slot_center(slots[0]);
  const Point slot = slot_center(slots[1]);
  TruthStep drag;
  drag.kind = ActionKind::Drag;
  drag.region = Region::circle(slot, 24);
  drag.start_region = Region::circle(piece, 20);
  a.puzzle.truth = {drag};
  a.puzzle.prompt = "Drag the loose piece onto the matching outline.";

  const ReasoningTrace steps = {
      "The loose piece sits near (" + std::to_string(int(piece.x)) + ", " +
          std::to_string(int(piece.y)) + ").",
      "The matching outline is near (" + std::to_string(int(slot.x)) + ", " +
          std::to_string(int(slot.y)) + ").",
      "Drag the piece onto the outline."};
  a.puzzle.reference_reasoning = steps;
  a.script = {
      {"reason", fenced(json{{"steps", steps},
                             {"targets", {"the loose piece", "the matching outline"}}})},
      {"ground", fenced(json{{"coordinates",
                              json::array({point_to_json(piece), point_to_json(slot)})}})}};
  return a;
}

Authored author_vtt(const std::string& id, Rng& rng) {
  Authored a;
  a.puzzle.id = id;
  a.puzzle.category = Category::Vtt;
  a.puzzle.image_w = 320;
  a.puzzle.image_h = 240;

  const Point c = slot_center(rng.uniform_int(0, 8));
  // Kite around the slot center: convex, so always a simple polygon.
  const double l = 30 + rng.uniform_int(0, 8), t = 25 + rng.uniform_int(0, 8);
  const double r = 30 + rng.uniform_int(0, 8), b = 25 + rng.uniform_int(0, 8);
  const Region region = Region::polygon(
      {{c.x - l, c.y}, {c.x, c.y - t}, {c.x + r, c.y}, {c.x, c.y + b}});
  a.puzzle.truth = {{ActionKind::Click, region, std::nullopt}};
  a.puzzle.prompt = "Click the tile whose rotation completes the pattern.";

  const ReasoningTrace steps = {
      "Compare each tile against the pattern formed by its neighbors.",
      "The diamond-shaped tile is the one that fits once rotated.",
      "Click inside that tile."};
  a.puzzle.reference_reasoning = steps;
  a.script = {
      {"reason",
       fenced(json{{"steps", steps}, {"targets", {"the diamond-shaped tile"}}})},
      {"ground",
       fenced(json{{"coordinates", json::array({point_to_json(region.center)})}})}};
  return a;
}

Authored author(Category category, const std::string& id, Rng& rng) {
  switch (category) {
    case Category::Gobang: return author_gobang(id, rng);
    case Category::IconCrush: return author_match3(id, rng);
    case Category::Recaptcha: return author_select(id, rng);
    case Category::Icon: return author_icon(id, rng);
    case Category::SpaceReasoning: return author_space(id, rng);
    case Category::Hcaptcha: return author_hcaptcha(id, rng);
    case Category::Vtt: return author_vtt(id, rng);
  }
  throw std::logic_error("unhandled category");
}

}  // namespace

Corpus generate_fixture_corpus(const std::string& dir, const FixtureSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("fixture count must be positive");

  Corpus corpus;
  corpus.dir = dir;
  ScriptWriter script;
  std::map<Category, int> serial;
  const std::vector<Category>& cats = all_categories();

  const std::string png(reinterpret_cast<const char*>(kPngBytes), sizeof(kPngBytes));
  for (int i = 0; i < spec.count; ++i) {
    const Category category = cats[i % cats.size()];
    const int n = ++serial[category];
    std::ostringstream id;
    id << lower(to_string(category)) << "-" << (n < 100 ? "0" : "") << (n < 10 ? "0" : "")
       << n;

    // One private stream per puzzle: reordering or resizing the corpus never
    // perturbs the other puzzles.
    Rng rng(spec.seed * 1000003u + static_cast<std::uint64_t>(i));
    Authored a = author(category, id.str(), rng);
    a.puzzle.image_path = "images/" + id.str() + ".png";
    write_text_file(dir + "/" + a.puzzle.image_path, png);
    for (const auto& [stage, reply] : a.script) script.add(a.puzzle.id, stage, reply);
    corpus.puzzles.push_back(std::move(a.puzzle));
  }

  save_corpus(corpus, dir);
  write_text_file(dir + "/script.jsonl", script.text);
  return load_corpus(dir);
}

}  // namespace capbench
