#include "capbench/agent.hpp"

namespace capbench {

// ===== Gobang =====

namespace {

// Longest run of `player` through (r, c) in the given direction, assuming the
// cell itself already holds the player symbol.
int run_through(const SymbolGrid& g, const std::string& player, int r, int c, int dr,
                int dc) {
  int count = 1;
  for (int rr = r + dr, cc = c + dc;
       rr >= 0 && rr < g.rows && cc >= 0 && cc < g.cols && g.at(rr, cc) == player;
       rr += dr, cc += dc)
    ++count;
  for (int rr = r - dr, cc = c - dc;
       rr >= 0 && rr < g.rows && cc >= 0 && cc < g.cols && g.at(rr, cc) == player;
       rr -= dr, cc -= dc)
    ++count;
  return count;
}

bool wins_at(const SymbolGrid& g, const std::string& player, int r, int c,
             int run_length) {
  static const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& d : dirs)
    if (run_through(g, player, r, c, d[0], d[1]) >= run_length) return true;
  return false;
}

}  // namespace

std::optional<CellRef> solve_gobang(const SymbolGrid& grid, const std::string& player,
                                    int run_length) {
  if (player.empty() || player == grid.empty_symbol)
    throw AgentError("player symbol must be a non-empty board symbol");
  SymbolGrid g = grid;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (g.at(r, c) != g.empty_symbol) continue;
      g.at(r, c) = player;
      const bool wins = wins_at(g, player, r, c, run_length);
      g.at(r, c) = grid.empty_symbol;
      if (wins) return CellRef{r, c};
    }
  }
  return std::nullopt;
}

// ===== Match-3 =====

namespace {

// True when a run of >= 3 equal symbols passes through (r, c).
bool run3_through(const SymbolGrid& g, int r, int c) {
  const std::string& s = g.at(r, c);
  int horiz = 1;
  for (int cc = c - 1; cc >= 0 && g.at(r, cc) == s; --cc) ++horiz;
  for (int cc = c + 1; cc < g.cols && g.at(r, cc) == s; ++cc) ++horiz;
  if (horiz >= 3) return true;
  int vert = 1;
  for (int rr = r - 1; rr >= 0 && g.at(rr, c) == s; --rr) ++vert;
  for (int rr = r + 1; rr < g.rows && g.at(rr, c) == s; ++rr) ++vert;
  return vert >= 3;
}

bool swap_creates_run(SymbolGrid& g, const CellRef& a, const CellRef& b) {
  if (g.at(a.row, a.col) == g.at(b.row, b.col)) return false;
  std::swap(g.at(a.row, a.col), g.at(b.row, b.col));
  const bool ok = run3_through(g, a.row, a.col) || run3_through(g, b.row, b.col);
  std::swap(g.at(a.row, a.col), g.at(b.row, b.col));
  return ok;
}

}  // namespace

std::optional<SwapMove> solve_match3(const SymbolGrid& grid) {
  if (grid.rows < 3 || grid.cols < 3)
    throw AgentError("match-3 board must be at least 3x3");
  SymbolGrid g = grid;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const CellRef here{r, c};
      // Right neighbor sorts before the down neighbor, so this scan emits
      // candidate pairs in lexicographic order.
      if (c + 1 < g.cols && swap_creates_run(g, here, {r, c + 1}))
        return SwapMove{here, {r, c + 1}};
      if (r + 1 < g.rows && swap_creates_run(g, here, {r + 1, c}))
        return SwapMove{here, {r + 1, c}};
    }
  }
  return std::nullopt;
}

// ===== Select-all =====

std::vector<CellRef> solve_select_all(const SymbolGrid& grid, const std::string& target) {
  if (target.empty()) throw AgentError("target symbol must be non-empty");
  std::vector<CellRef> out;
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      if (grid.at(r, c) == target) out.push_back({r, c});
  return out;
}

}  // namespace capbench
