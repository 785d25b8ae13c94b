#include "capbench/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capbench/ioutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace capbench {

// ===== Taxonomy =====

const std::vector<Category>& all_categories() {
  static const std::vector<Category> cats = {
      Category::Gobang,    Category::Icon,     Category::IconCrush,
      Category::Recaptcha, Category::SpaceReasoning,
      Category::Hcaptcha,  Category::Vtt,
  };
  return cats;
}

std::string to_string(Category c) {
  switch (c) {
    case Category::Gobang: return "Gobang";
    case Category::Icon: return "Icon";
    case Category::IconCrush: return "IconCrush";
    case Category::Recaptcha: return "Recaptcha";
    case Category::SpaceReasoning: return "SpaceReasoning";
    case Category::Hcaptcha: return "Hcaptcha";
    case Category::Vtt: return "VTT";
  }
  return "?";
}

std::optional<Category> category_from_string(const std::string& s) {
  for (Category c : all_categories())
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Click: return "click";
    case ActionKind::Down: return "down";
    case ActionKind::Up: return "up";
    case ActionKind::Drag: return "drag";
    case ActionKind::Move: return "move";
  }
  return "?";
}

std::optional<ActionKind> action_kind_from_string(const std::string& s) {
  for (ActionKind k : {ActionKind::Click, ActionKind::Down, ActionKind::Up,
                       ActionKind::Drag, ActionKind::Move})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::string to_string(Condition c) {
  return c == Condition::WithReasoning ? "with_reasoning" : "without_reasoning";
}

std::optional<Condition> condition_from_string(const std::string& s) {
  if (s == "with_reasoning") return Condition::WithReasoning;
  if (s == "without_reasoning") return Condition::WithoutReasoning;
  return std::nullopt;
}

// ===== Struct helpers =====

Point BoardInfo::cell_center(int r, int c) const {
  return Point{origin.x + (c + 0.5) * cell_w, origin.y + (r + 0.5) * cell_h};
}

bool Puzzle::in_bounds(const Point& p) const {
  return p.x >= 0.0 && p.x <= image_w && p.y >= 0.0 && p.y <= image_h;
}

const Puzzle* Corpus::find(const std::string& id) const {
  for (const Puzzle& p : puzzles)
    if (p.id == id) return &p;
  return nullptr;
}

std::map<std::string, int> Corpus::category_counts() const {
  std::map<std::string, int> counts;
  for (const Puzzle& p : puzzles) ++counts[to_string(p.category)];
  return counts;
}

// ===== JSON conversion =====

json point_to_json(const Point& p) { return json::array({p.x, p.y}); }

Point point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw CorpusError("point must be a [x,y] array");
  return Point{j[0].get<double>(), j[1].get<double>()};
}

static json region_to_json(const Region& r) {
  json j;
  switch (r.shape) {
    case RegionShape::Circle:
      j["shape"] = "circle";
      j["center"] = point_to_json(r.center);
      j["radius"] = r.radius;
      break;
    case RegionShape::Box:
      j["shape"] = "box";
      j["min"] = point_to_json(r.box_min);
      j["max"] = point_to_json(r.box_max);
      j["center"] = point_to_json(r.center);
      break;
    case RegionShape::Polygon: {
      j["shape"] = "polygon";
      json verts = json::array();
      for (const Point& v : r.vertices) verts.push_back(point_to_json(v));
      j["vertices"] = verts;
      j["center"] = point_to_json(r.center);
      break;
    }
  }
  return j;
}

static Region region_from_json(const json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "circle") {
    return Region::circle(point_from_json(j.at("center")),
                          j.at("radius").get<double>());
  }
  if (shape == "box") {
    const Point mn = point_from_json(j.at("min"));
    const Point mx = point_from_json(j.at("max"));
    if (j.contains("center"))
      return Region::box(mn, mx, point_from_json(j.at("center")));
    return Region::box(mn, mx);
  }
  if (shape == "polygon") {
    std::vector<Point> verts;
    for (const json& v : j.at("vertices")) verts.push_back(point_from_json(v));
    if (j.contains("center"))
      return Region::polygon(std::move(verts), point_from_json(j.at("center")));
    return Region::polygon(std::move(verts));
  }
  throw CorpusError("unknown region shape: " + shape);
}

static json truth_step_to_json(const TruthStep& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["region"] = region_to_json(s.region);
  if (s.start_region) j["start_region"] = region_to_json(*s.start_region);
  return j;
}

static TruthStep truth_step_from_json(const json& j) {
  TruthStep s;
  const std::string kind = j.at("kind").get<std::string>();
  const auto k = action_kind_from_string(kind);
  if (!k) throw CorpusError("unknown action kind: " + kind);
  s.kind = *k;
  s.region = region_from_json(j.at("region"));
  if (j.contains("start_region"))
    s.start_region = region_from_json(j.at("start_region"));
  return s;
}

json action_step_to_json(const ActionStep& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["coordinate"] = point_to_json(s.coordinate);
  if (s.end) j["end"] = point_to_json(*s.end);
  return j;
}

ActionStep action_step_from_json(const json& j) {
  ActionStep s;
  const std::string kind = j.at("kind").get<std::string>();
  const auto k = action_kind_from_string(kind);
  if (!k) throw CorpusError("unknown action kind: " + kind);
  s.kind = *k;
  s.coordinate = point_from_json(j.at("coordinate"));
  if (j.contains("end")) s.end = point_from_json(j.at("end"));
  if ((s.kind == ActionKind::Drag) != s.end.has_value())
    throw CorpusError("drag steps carry an end point, other kinds do not");
  return s;
}

static json board_to_json(const BoardInfo& b) {
  json j;
  j["origin"] = point_to_json(b.origin);
  j["cell_size"] = json::array({b.cell_w, b.cell_h});
  j["rows"] = b.rows;
  j["cols"] = b.cols;
  j["symbols"] = b.symbols;
  j["empty"] = b.empty_symbol;
  if (b.player_symbol) j["player"] = *b.player_symbol;
  if (b.target_symbol) j["target"] = *b.target_symbol;
  return j;
}

static BoardInfo board_from_json(const json& j) {
  BoardInfo b;
  b.origin = point_from_json(j.at("origin"));
  const json& cs = j.at("cell_size");
  b.cell_w = cs.at(0).get<double>();
  b.cell_h = cs.at(1).get<double>();
  b.rows = j.at("rows").get<int>();
  b.cols = j.at("cols").get<int>();
  b.symbols = j.at("symbols").get<std::vector<std::string>>();
  if (j.contains("empty")) b.empty_symbol = j.at("empty").get<std::string>();
  if (j.contains("player")) b.player_symbol = j.at("player").get<std::string>();
  if (j.contains("target")) b.target_symbol = j.at("target").get<std::string>();
  return b;
}

json puzzle_to_json(const Puzzle& p) {
  json j;
  j["id"] = p.id;
  j["category"] = to_string(p.category);
  j["image_path"] = p.image_path;
  j["image_size"] = json::array({p.image_w, p.image_h});
  j["prompt"] = p.prompt;
  json truth = json::array();
  for (const TruthStep& s : p.truth) truth.push_back(truth_step_to_json(s));
  j["truth"] = truth;
  if (p.reference_reasoning) j["reference_reasoning"] = *p.reference_reasoning;
  if (p.board) j["board"] = board_to_json(*p.board);
  return j;
}

Puzzle puzzle_from_json(const json& j) {
  Puzzle p;
  p.id = j.at("id").get<std::string>();
  const std::string cat = j.at("category").get<std::string>();
  const auto c = category_from_string(cat);
  if (!c) throw CorpusError("unknown category: " + cat);
  p.category = *c;
  p.image_path = j.at("image_path").get<std::string>();
  const json& sz = j.at("image_size");
  p.image_w = sz.at(0).get<double>();
  p.image_h = sz.at(1).get<double>();
  p.prompt = j.at("prompt").get<std::string>();
  for (const json& s : j.at("truth")) p.truth.push_back(truth_step_from_json(s));
  if (j.contains("reference_reasoning"))
    p.reference_reasoning = j.at("reference_reasoning").get<ReasoningTrace>();
  if (j.contains("board")) p.board = board_from_json(j.at("board"));
  return p;
}

// ===== Corpus I/O =====

static constexpr const char* kManifestName = "manifest.json";
static constexpr const char* kCorpusFormat = "capbench-corpus/1";

Corpus load_corpus(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest_path = root / kManifestName;
  if (!fs::exists(manifest_path))
    throw CorpusError("no manifest.json in corpus directory: " + dir);

  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path.string()));
  } catch (const json::exception& e) {
    throw CorpusError("manifest.json: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kCorpusFormat)
    throw CorpusError("manifest.json: unsupported format field");
  const std::string records = manifest.value("records", "puzzles.jsonl");

  Corpus corpus;
  corpus.dir = dir;
  const fs::path records_path = root / records;
  std::ifstream in(records_path, std::ios::binary);
  if (!in) throw CorpusError("cannot read record file: " + records_path.string());

  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Puzzle p;
    try {
      p = puzzle_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw CorpusError(records + " line " + std::to_string(line_no) + ": " +
                        e.what());
    } catch (const CorpusError& e) {
      throw CorpusError(records + " line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    if (!seen.insert(p.id).second)
      throw CorpusError(records + " line " + std::to_string(line_no) +
                        ": duplicate puzzle id " + p.id);
    if (!fs::exists(root / p.image_path))
      throw CorpusError(records + " line " + std::to_string(line_no) +
                        ": dangling image reference " + p.image_path +
                        " (puzzle " + p.id + ")");
    corpus.puzzles.push_back(std::move(p));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);

  std::string records_text;
  for (const Puzzle& p : corpus.puzzles) {
    records_text += puzzle_to_json(p).dump();
    records_text += '\n';
  }
  write_text_file((root / "puzzles.jsonl").string(), records_text);

  json manifest;
  manifest["format"] = kCorpusFormat;
  manifest["records"] = "puzzles.jsonl";
  manifest["puzzle_count"] = corpus.puzzles.size();
  manifest["categories"] = corpus.category_counts();
  write_text_file((root / kManifestName).string(), manifest.dump(2) + "\n");
}

// ===== Prediction I/O =====

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read prediction file: " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      PredictionRecord r;
      r.model_id = j.at("model_id").get<std::string>();
      r.puzzle_id = j.at("puzzle_id").get<std::string>();
      const std::string cond = j.at("condition").get<std::string>();
      const auto c = condition_from_string(cond);
      if (!c) throw CorpusError("unknown condition: " + cond);
      r.condition = *c;
      for (const json& s : j.at("predicted"))
        r.predicted.push_back(action_step_from_json(s));
      if (j.contains("trace")) r.trace = j.at("trace").get<ReasoningTrace>();
      if (j.contains("raw_token_count"))
        r.raw_token_count = j.at("raw_token_count").get<std::int64_t>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw CorpusError(path + " line " + std::to_string(line_no) + ": " +
                        e.what());
    } catch (const CorpusError& e) {
      throw CorpusError(path + " line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::string& path) {
  std::string text;
  for (const PredictionRecord& r : records) {
    json j;
    j["model_id"] = r.model_id;
    j["puzzle_id"] = r.puzzle_id;
    j["condition"] = to_string(r.condition);
    json steps = json::array();
    for (const ActionStep& s : r.predicted)
      steps.push_back(action_step_to_json(s));
    j["predicted"] = steps;
    if (r.trace) j["trace"] = *r.trace;
    if (r.raw_token_count) j["raw_token_count"] = *r.raw_token_count;
    text += j.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

// ===== Validation =====

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const Diagnostic& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

static void check_region(const Region& r, const std::string& puzzle_id,
                         const std::string& what,
                         std::vector<Diagnostic>& out) {
  switch (r.shape) {
    case RegionShape::Circle:
      if (!(r.radius > 0.0)) {
        out.push_back({Severity::Error, puzzle_id,
                       what + ": circle radius must be positive"});
        return;
      }
      break;
    case RegionShape::Box:
      if (!(r.box_min.x < r.box_max.x && r.box_min.y < r.box_max.y)) {
        out.push_back({Severity::Error, puzzle_id,
                       what + ": box min must be strictly below max"});
        return;
      }
      break;
    case RegionShape::Polygon:
      if (r.vertices.size() < 3) {
        out.push_back({Severity::Error, puzzle_id,
                       what + ": polygon needs at least 3 vertices"});
        return;
      }
      if (!polygon_is_simple(r.vertices)) {
        out.push_back({Severity::Error, puzzle_id,
                       what + ": polygon is self-intersecting"});
        return;
      }
      break;
  }
  if (!r.contains(r.center))
    out.push_back({Severity::Error, puzzle_id,
                   what + ": declared center lies outside the region"});
}

std::vector<Diagnostic> validate_corpus(const Corpus& corpus) {
  std::vector<Diagnostic> out;
  std::set<std::string> seen;
  for (const Puzzle& p : corpus.puzzles) {
    if (p.id.empty())
      out.push_back({Severity::Error, p.id, "puzzle id is empty"});
    if (!seen.insert(p.id).second)
      out.push_back({Severity::Error, p.id, "duplicate puzzle id"});
    if (!(p.image_w > 0.0 && p.image_h > 0.0))
      out.push_back({Severity::Error, p.id, "image size must be positive"});
    if (p.prompt.empty())
      out.push_back({Severity::Warning, p.id, "prompt is empty"});
    if (p.truth.empty())
      out.push_back({Severity::Error, p.id, "truth has no steps"});

    for (std::size_t i = 0; i < p.truth.size(); ++i) {
      const std::string what = "truth step " + std::to_string(i);
      check_region(p.truth[i].region, p.id, what, out);
      if (p.truth[i].start_region)
        check_region(*p.truth[i].start_region, p.id, what + " start", out);
      if (!p.in_bounds(p.truth[i].region.center))
        out.push_back({Severity::Warning, p.id,
                       what + ": region center outside image bounds"});
    }

    if (p.reference_reasoning) {
      for (const std::string& step : *p.reference_reasoning) {
        if (step.find_first_not_of(" \t\r\n") == std::string::npos) {
          out.push_back({Severity::Error, p.id,
                         "reference reasoning contains a whitespace-only step"});
          break;
        }
      }
    }

    if (p.board) {
      const BoardInfo& b = *p.board;
      if (b.rows <= 0 || b.cols <= 0)
        out.push_back({Severity::Error, p.id, "board rows/cols must be positive"});
      else if (static_cast<int>(b.symbols.size()) != b.rows * b.cols)
        out.push_back({Severity::Error, p.id,
                       "board symbols must have rows*cols entries"});
      if (!(b.cell_w > 0.0 && b.cell_h > 0.0))
        out.push_back({Severity::Error, p.id, "board cell size must be positive"});
      else if (b.rows > 0 && b.cols > 0 &&
               (!p.in_bounds(b.origin) ||
                !p.in_bounds(Point{b.origin.x + b.cols * b.cell_w,
                                   b.origin.y + b.rows * b.cell_h})))
        out.push_back({Severity::Warning, p.id,
                       "board lattice extends beyond image bounds"});
      if (p.category == Category::Gobang && !b.player_symbol)
        out.push_back({Severity::Warning, p.id,
                       "Gobang board without a player symbol"});
      if (p.category == Category::Recaptcha && !b.target_symbol)
        out.push_back({Severity::Warning, p.id,
                       "Recaptcha board without a target symbol"});
    }

    if (p.category == Category::IconCrush && !p.truth.empty()) {
      bool has_drag = false;
      for (const TruthStep& s : p.truth)
        if (s.kind == ActionKind::Drag) has_drag = true;
      if (!has_drag)
        out.push_back({Severity::Warning, p.id,
                       "IconCrush truth usually contains a drag step"});
    }
  }
  return out;
}

}  // namespace capbench
