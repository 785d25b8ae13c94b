#include "capbench/agent.hpp"

#include <sstream>

#include "capbench/ioutil.hpp"

namespace capbench {

using nlohmann::json;

// ===== Routing =====

std::string to_string(Branch b) { return b == Branch::Grid ? "grid" : "non_grid"; }

Branch default_branch(Category c) {
  switch (c) {
    case Category::Recaptcha:
    case Category::IconCrush:
    case Category::Gobang:
      return Branch::Grid;
    default:
      return Branch::NonGrid;
  }
}

// ===== SymbolGrid =====

Point SymbolGrid::cell_center(int r, int c) const {
  return {origin.x + (c + 0.5) * cell_w, origin.y + (r + 0.5) * cell_h};
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace

SymbolGrid SymbolGrid::parse(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw GridParseError("grid text must be wrapped in brackets: '" + text + "'");
  const std::string inner = t.substr(1, t.size() - 2);
  if (trim(inner).empty()) throw GridParseError("grid text has no cells");

  SymbolGrid g;
  std::size_t width = 0;
  for (const std::string& row_text : split(inner, ';')) {
    std::vector<std::string> row;
    for (const std::string& cell : split(row_text, ',')) {
      const std::string symbol = trim(cell);
      if (symbol.empty()) throw GridParseError("empty cell in grid text");
      row.push_back(symbol);
    }
    if (g.rows == 0) width = row.size();
    if (row.size() != width)
      throw GridShapeError("ragged grid: row " + std::to_string(g.rows) + " has " +
                           std::to_string(row.size()) + " cells, expected " +
                           std::to_string(width));
    for (std::string& s : row) g.cells.push_back(std::move(s));
    ++g.rows;
  }
  g.cols = static_cast<int>(width);
  if (g.rows != g.cols)
    throw GridShapeError("grid must be square, got " + std::to_string(g.rows) + "x" +
                         std::to_string(g.cols));
  return g;
}

SymbolGrid SymbolGrid::from_board(const BoardInfo& board) {
  SymbolGrid g;
  g.rows = board.rows;
  g.cols = board.cols;
  g.cells = board.symbols;
  g.empty_symbol = board.empty_symbol;
  g.origin = board.origin;
  g.cell_w = board.cell_w;
  g.cell_h = board.cell_h;
  return g;
}

std::string SymbolGrid::to_bracket_text() const {
  std::ostringstream out;
  out << '[';
  for (int r = 0; r < rows; ++r) {
    if (r) out << "; ";
    for (int c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << at(r, c);
    }
  }
  out << ']';
  return out.str();
}

// ===== PipelineConfig =====

namespace {

const std::map<std::string, std::string>& default_prompts() {
  static const std::map<std::string, std::string> prompts = {
      {"category",
       "Decide whether this puzzle is board-indexable (a regular grid of cells) or "
       "free-form. Puzzle prompt: {prompt}\nReply with the single word grid or "
       "non_grid."},
      {"map",
       "Read the board in the image and transcribe it as bracketed rows of cell "
       "symbols, e.g. [a,a,a; b,b,c; c,b,b]. Puzzle prompt: {prompt}\nReply with the "
       "bracket text only."},
      {"reason_grid",
       "Solve this board puzzle step by step.\nPuzzle prompt: {prompt}\nBoard: "
       "{grid}\n{solver}\nWrite numbered reasoning steps that justify the answer, "
       "then reply with one fenced JSON block: {\"steps\": [\"...\", ...]}."},
      {"reason_free",
       "Solve this visual puzzle step by step.\nPuzzle prompt: {prompt}\nWrite "
       "numbered reasoning steps, then reply with one fenced JSON block: {\"steps\": "
       "[\"...\", ...], \"targets\": [\"short description of each click or drag "
       "endpoint, in order\", ...]}."},
      {"ground",
       "Locate each target in the image and give its pixel coordinate.\nImage size: "
       "{width}x{height}\nTargets:\n{targets}\nReply with one fenced JSON block: "
       "{\"coordinates\": [[x, y], ...]} with one [x, y] pair per target, in order."},
      {"discriminate",
       "Check this reasoning for coherence.\nPuzzle prompt: {prompt}\nSteps:\n{steps}\n"
       "Reply pass if the reasoning is coherent, otherwise fail: <reason>."},
  };
  return prompts;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() { return PipelineConfig(); }

Branch PipelineConfig::branch_for(Category c) const {
  auto it = branch_overrides.find(c);
  return it != branch_overrides.end() ? it->second : default_branch(c);
}

std::string PipelineConfig::prompt(const std::string& stage,
                                   const std::map<std::string, std::string>& fields) const {
  std::string text;
  auto it = prompts.find(stage);
  if (it != prompts.end()) {
    text = it->second;
  } else {
    auto dit = default_prompts().find(stage);
    if (dit == default_prompts().end())
      throw AgentError("no prompt template for stage '" + stage + "'");
    text = dit->second;
  }
  for (const auto& [key, value] : fields) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
      text.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return text;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  c.model_id = j.value("model_id", c.model_id);
  c.gobang_run_length = j.value("gobang_run_length", c.gobang_run_length);
  c.min_trace_steps = j.value("min_trace_steps", c.min_trace_steps);
  c.max_trace_steps = j.value("max_trace_steps", c.max_trace_steps);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.backend_category_judge = j.value("backend_category_judge", c.backend_category_judge);
  c.backend_discriminator = j.value("backend_discriminator", c.backend_discriminator);
  if (j.contains("branch_overrides")) {
    for (const auto& [cat, branch] : j["branch_overrides"].items()) {
      const std::string b = branch.get<std::string>();
      if (b != "grid" && b != "non_grid")
        throw AgentError("branch override must be grid or non_grid, got '" + b + "'");
      const std::optional<Category> parsed = category_from_string(cat);
      if (!parsed) throw AgentError("unknown category in branch_overrides: '" + cat + "'");
      c.branch_overrides[*parsed] = b == "grid" ? Branch::Grid : Branch::NonGrid;
    }
  }
  if (j.contains("prompts")) {
    for (const auto& [stage, text] : j["prompts"].items())
      c.prompts[stage] = text.get<std::string>();
  }
  if (c.gobang_run_length < 2) throw AgentError("gobang_run_length must be at least 2");
  if (c.max_concurrency < 1) throw AgentError("max_concurrency must be at least 1");
  if (c.min_trace_steps < 1 || c.max_trace_steps < c.min_trace_steps)
    throw AgentError("trace step bounds must satisfy 1 <= min <= max");
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  return from_json(json::parse(read_text_file(path.string())));
}

json PipelineConfig::to_json() const {
  json j;
  j["model_id"] = model_id;
  j["gobang_run_length"] = gobang_run_length;
  j["min_trace_steps"] = min_trace_steps;
  j["max_trace_steps"] = max_trace_steps;
  j["max_concurrency"] = max_concurrency;
  j["backend_category_judge"] = backend_category_judge;
  j["backend_discriminator"] = backend_discriminator;
  json overrides = json::object();
  for (const auto& [cat, branch] : branch_overrides)
    overrides[to_string(cat)] = to_string(branch);
  j["branch_overrides"] = overrides;
  j["prompts"] = prompts.empty() ? json::object() : json(prompts);
  return j;
}

}  // namespace capbench
