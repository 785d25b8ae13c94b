// Acceptance gate: every release-blocking property, one pass/fail line each.
//
//   acceptance --cli <path-to-capbench> [--root <repo-root>] [--skip N] [--only N]
//
// Criteria run in-process against the library where possible and through the
// CLI where the property is about the shipped binary. Criterion 1 asserts the
// published power-law constants against the released per-model aggregates; the
// aggregates do not reproduce them (docs/limits.md traces the gap), so that
// criterion is expected to fail and CMake registers it as its own ctest entry.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capbench/agent.hpp"
#include "capbench/geometry.hpp"
#include "capbench/ioutil.hpp"
#include "capbench/metrics.hpp"
#include "capbench/rng.hpp"
#include "capbench/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace capbench;

namespace {

struct Ctx {
  fs::path cli;
  fs::path root;
  fs::path work;
  std::chrono::steady_clock::time_point start;
  std::vector<std::string> detail;

  void note(const std::string& line) { detail.push_back(line); }
};

std::string num(double v, int places = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(places) << v;
  return os.str();
}

bool within_pct(double got, double want, double pct) {
  return std::fabs(got - want) <= pct / 100.0 * std::fabs(want);
}

// Runs the CLI with output captured to a scratch file; returns the exit code.
int run_cli(Ctx& ctx, const std::string& args, std::string* output = nullptr) {
  const fs::path log = ctx.work / "cli-output.log";
  const std::string cmd = "\"" + ctx.cli.string() + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (output) *output = read_text_file(log.string());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json load_json(const fs::path& path) {
  return json::parse(read_text_file(path.string()));
}

double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

// ===== Enumeration oracles (duplicated from the unit suites on purpose:
// the gate must not share code with the implementations it checks) =====

double oracle_mcnemar_exact(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  const std::uint64_t lo = std::min(b, c), hi = std::max(b, c);
  std::uint64_t tail_low = 0, tail_high = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const std::uint64_t ones =
        static_cast<std::uint64_t>(__builtin_popcountll(mask));
    if (ones <= lo) ++tail_low;
    if (ones >= hi) ++tail_high;
  }
  const double p = static_cast<double>(2 * std::min(tail_low, tail_high)) /
                   std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, p);
}

std::vector<std::uint64_t> oracle_doubled_ranks(const std::vector<double>& diffs) {
  std::vector<double> mags;
  for (double d : diffs)
    if (d != 0.0) mags.push_back(std::fabs(d));
  std::vector<std::uint64_t> out;
  for (double m : mags) {
    std::uint64_t below = 0, equal = 0;
    for (double other : mags) {
      if (other < m) ++below;
      if (other == m) ++equal;
    }
    out.push_back(2 * below + equal + 1);  // doubled midrank stays integral
  }
  return out;
}

double oracle_wilcoxon_exact(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double v : diffs)
    if (v != 0.0) d.push_back(v);
  const std::vector<std::uint64_t> ranks = oracle_doubled_ranks(d);
  const std::size_t n = d.size();
  std::uint64_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0.0) w2 += ranks[i];
  std::uint64_t below = 0, above = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::uint64_t{1} << i)) sum += ranks[i];
    if (sum <= w2) ++below;
    if (sum >= w2) ++above;
  }
  const double p = static_cast<double>(2 * std::min(below, above)) /
                   std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, p);
}

bool oracle_wins_at(SymbolGrid g, const std::string& player, int r, int c,
                    int run_length) {
  g.at(r, c) = player;
  static const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& d : dirs) {
    for (int offset = 0; offset < run_length; ++offset) {
      const int r0 = r - offset * d[0];
      const int c0 = c - offset * d[1];
      bool all = true;
      for (int i = 0; i < run_length && all; ++i) {
        const int rr = r0 + i * d[0];
        const int cc = c0 + i * d[1];
        if (rr < 0 || rr >= g.rows || cc < 0 || cc >= g.cols ||
            g.at(rr, cc) != player)
          all = false;
      }
      if (all) return true;
    }
  }
  return false;
}

std::optional<CellRef> oracle_gobang(const SymbolGrid& g, const std::string& player,
                                     int run_length) {
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (g.at(r, c) == g.empty_symbol && oracle_wins_at(g, player, r, c, run_length))
        return CellRef{r, c};
  return std::nullopt;
}

int oracle_segment_len(const SymbolGrid& g, int r, int c, bool horizontal) {
  const int limit = horizontal ? g.cols : g.rows;
  int best = 0, start = 0;
  while (start < limit) {
    int end = start;
    const std::string& s = horizontal ? g.at(r, start) : g.at(start, c);
    while (end + 1 < limit &&
           (horizontal ? g.at(r, end + 1) : g.at(end + 1, c)) == s)
      ++end;
    const int pos = horizontal ? c : r;
    if (pos >= start && pos <= end) best = end - start + 1;
    start = end + 1;
  }
  return best;
}

std::optional<SwapMove> oracle_match3(const SymbolGrid& grid) {
  SymbolGrid g = grid;
  const auto valid = [&](const CellRef& a, const CellRef& b) {
    if (g.at(a.row, a.col) == g.at(b.row, b.col)) return false;
    std::swap(g.at(a.row, a.col), g.at(b.row, b.col));
    const bool ok = oracle_segment_len(g, a.row, a.col, true) >= 3 ||
                    oracle_segment_len(g, a.row, a.col, false) >= 3 ||
                    oracle_segment_len(g, b.row, b.col, true) >= 3 ||
                    oracle_segment_len(g, b.row, b.col, false) >= 3;
    std::swap(g.at(a.row, a.col), g.at(b.row, b.col));
    return ok;
  };
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      if (c + 1 < g.cols && valid({r, c}, {r, c + 1}))
        return SwapMove{{r, c}, {r, c + 1}};
      if (r + 1 < g.rows && valid({r, c}, {r + 1, c}))
        return SwapMove{{r, c}, {r + 1, c}};
    }
  return std::nullopt;
}

bool oracle_polygon_contains(const std::vector<Point>& v, const Point& p) {
  const std::size_t n = v.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    if (point_on_segment(p, v[j], v[i])) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y) &&
        p.x < (v[j].x - v[i].x) * (p.y - v[i].y) / (v[j].y - v[i].y) + v[i].x)
      inside = !inside;
  }
  return inside;
}

std::vector<Point> random_simple_polygon(Rng& rng) {
  const int n = rng.uniform_int(3, 9);
  const Point c{rng.uniform_real(80.0, 220.0), rng.uniform_real(80.0, 220.0)};
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) {
    const double base = 2.0 * M_PI * i / n;
    angles.push_back(base + rng.uniform_real(0.05, 2.0 * M_PI / n - 0.05));
  }
  std::vector<Point> v;
  for (double a : angles) {
    const double r = rng.uniform_real(15.0, 70.0);
    v.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return v;
}

// ===== Criterion 1: published power-law constants =====

bool criterion_power_law(Ctx& ctx) {
  const fs::path report = ctx.root / "data" / "reference" / "model_metrics.json";
  const fs::path out = ctx.work / "fit-per-model.json";
  const auto t0 = std::chrono::steady_clock::now();
  std::string text;
  const int rc = run_cli(
      ctx, "fit --report \"" + report.string() + "\" --out \"" + out.string() + "\"",
      &text);
  const double elapsed = ms_since(t0);
  if (rc != 0) {
    ctx.note("fit exited with code " + std::to_string(rc));
    return false;
  }
  const json fit = load_json(out)["power_law"];
  if (!fit.contains("alpha")) {
    ctx.note("no power-law block in the fit output");
    return false;
  }
  const double A = fit["A"], k = fit["k"], alpha = fit["alpha"], r2 = fit["r2"];
  ctx.note("measured A=" + num(A) + " k=" + num(k) + " alpha=" + num(alpha) +
           " R2=" + num(r2) + " in " + num(elapsed, 0) + " ms");
  ctx.note("required alpha in [1.6, 2.2], A within 30% of 11.30, k within 30% of "
           "70.76, R2 within 0.08 of 0.828");
  bool ok = elapsed < 1000.0;
  ok = ok && alpha >= 1.6 && alpha <= 2.2;
  ok = ok && within_pct(A, 11.30, 30.0);
  ok = ok && within_pct(k, 70.76, 30.0);
  ok = ok && std::fabs(r2 - 0.828) <= 0.08;
  if (!ok) {
    ctx.note("expected failure: the released aggregates do not reproduce the "
             "published constants; docs/limits.md traces the gap point by point");
    // Diagnostic: anchoring the two agent systems at efficiency 1.0 recovers
    // the published k and alpha almost exactly. Their per-category
    // efficiencies were never released, so this cannot be the gate input.
    const fs::path agents =
        ctx.root / "data" / "reference" / "model_metrics_with_agents.json";
    const fs::path aout = ctx.work / "fit-diagnostic.json";
    if (run_cli(ctx, "fit --report \"" + agents.string() + "\" --out \"" +
                         aout.string() + "\"") == 0) {
      const json d = load_json(aout)["power_law"];
      if (d.contains("alpha"))
        ctx.note("diagnostic 9-point fit with agents anchored at efficiency 1.0: "
                 "A=" + num(d["A"]) + " k=" + num(d["k"]) + " alpha=" +
                 num(d["alpha"]) + " R2=" + num(d["r2"]));
    }
  }
  return ok;
}

// ===== Criterion 2: published linear laws =====

bool criterion_linear_laws(Ctx& ctx) {
  const fs::path report = ctx.root / "data" / "reference" / "model_metrics.json";
  const fs::path out = ctx.work / "fit-linear.json";
  if (run_cli(ctx, "fit --report \"" + report.string() + "\" --out \"" +
                       out.string() + "\"") != 0) {
    ctx.note("fit exited nonzero");
    return false;
  }
  const json j = load_json(out);
  const json& len = j["score_length"];
  const json& tci = j["score_tci"];
  if (!len.contains("slope") || !tci.contains("slope")) {
    ctx.note("missing linear-law block");
    return false;
  }
  const double a1 = len["slope"], b1 = len["intercept"], p1 = len["p_slope"];
  const double a2 = tci["slope"], b2 = tci["intercept"], p2 = tci["p_slope"];
  ctx.note("length = " + num(a1) + " * score + " + num(b1) + " (p " + num(p1) + ")");
  ctx.note("tci    = " + num(a2, 6) + " * score + " + num(b2, 6) + " (p " + num(p2) +
           ")");
  bool ok = within_pct(a1, 78.95, 25.0) && within_pct(b1, -62.11, 25.0);
  ok = ok && within_pct(a2, 0.349, 25.0) && within_pct(b2, -0.333, 25.0);
  ok = ok && p1 < 0.05 && p2 < 0.05;
  if (!ok) ctx.note("required within 25% of 78.95 / -62.11 and 0.349 / -0.333, p < 0.05");
  return ok;
}

// ===== Criterion 3: accuracy-distance regression =====

bool criterion_accuracy_l2(Ctx& ctx) {
  const fs::path report =
      ctx.root / "data" / "reference" / "model_metrics_with_agents.json";
  const fs::path out = ctx.work / "stats-agents.json";
  if (run_cli(ctx, "stats --report \"" + report.string() + "\" --out \"" +
                       out.string() + "\"") != 0) {
    ctx.note("stats exited nonzero");
    return false;
  }
  const json reg = load_json(out)["accuracy_l2_regression"];
  if (!reg.contains("slope")) {
    ctx.note("missing accuracy-L2 regression block");
    return false;
  }
  const double slope = reg["slope"], r2 = reg["r2"];
  ctx.note("slope " + num(slope, 6) + ", R2 " + num(r2, 6) + " over " +
           std::to_string(reg["n"].get<int>()) + " models");
  const bool ok = slope < 0.0 && r2 >= 0.90;
  if (!ok) ctx.note("required a negative slope with R2 >= 0.90");
  return ok;
}

// ===== Criterion 4: synthetic recovery =====

bool criterion_recovery(Ctx& ctx) {
  Rng rng(90125);
  int power_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double A = rng.uniform_real(-20.0, 40.0);
    const double k = rng.uniform_real(5.0, 120.0);
    const double alpha = rng.uniform_real(0.3, 4.5);
    const int n = rng.uniform_int(6, 16);
    std::vector<double> eff, acc;
    for (int i = 0; i < n; ++i) {
      const double e = (i + 1.0) / n;
      eff.push_back(e);
      acc.push_back(A + k * std::pow(e, alpha));
    }
    try {
      const PowerFit fit = powerlaw_fit(eff, acc);
      const bool ok =
          std::fabs(fit.A - A) <= 1e-6 * std::max(1.0, std::fabs(A)) &&
          std::fabs(fit.k - k) <= 1e-6 * std::max(1.0, std::fabs(k)) &&
          std::fabs(fit.alpha - alpha) <= 1e-6 * std::max(1.0, alpha);
      if (!ok) ++power_failures;
    } catch (const StatsError&) {
      ++power_failures;
    }
  }

  Rng lin(424242);
  int ols_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double slope = lin.uniform_real(-50.0, 50.0);
    const double intercept = lin.uniform_real(-100.0, 100.0);
    const int n = lin.uniform_int(3, 40);
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      const double xv = lin.uniform_real(-10.0, 10.0) + i;
      x.push_back(xv);
      y.push_back(slope * xv + intercept);
    }
    const LinearFit fit = ols_fit(x, y);
    const bool ok =
        std::fabs(fit.slope - slope) <= 1e-10 * std::max(1.0, std::fabs(slope)) &&
        std::fabs(fit.intercept - intercept) <=
            1e-10 * std::max(1.0, std::fabs(intercept));
    if (!ok) ++ols_failures;
  }

  ctx.note("power law: " + std::to_string(100 - power_failures) +
           "/100 trials within 1e-6 relative");
  ctx.note("OLS: " + std::to_string(100 - ols_failures) +
           "/100 trials within 1e-10 relative");
  return power_failures == 0 && ols_failures == 0;
}

// ===== Criterion 5: exact tests against brute force =====

bool criterion_exact_tests(Ctx& ctx) {
  double max_delta = 0.0;
  long cases = 0;

  for (std::uint64_t b = 0; b <= 10; ++b)
    for (std::uint64_t c = 0; b + c <= 10; ++c) {
      if (b + c == 0) continue;
      PairedBinaryTable t;
      t.b = b;
      t.c = c;
      max_delta = std::max(max_delta, std::fabs(mcnemar(t) - oracle_mcnemar_exact(b, c)));
      ++cases;
    }

  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      std::vector<double> d;
      for (std::size_t i = 0; i < n; ++i)
        d.push_back(mask & (std::uint64_t{1} << i) ? double(i + 1) : -double(i + 1));
      max_delta =
          std::max(max_delta, std::fabs(wilcoxon_signed_rank(d) - oracle_wilcoxon_exact(d)));
      ++cases;
    }
  }

  Rng rng(19937);
  for (int trial = 0; trial < 1000; ++trial) {
    PairedBinaryTable t;
    t.b = static_cast<std::uint64_t>(rng.uniform_int(0, 20));
    t.c = static_cast<std::uint64_t>(rng.uniform_int(0, 20 - static_cast<int>(t.b)));
    if (t.b + t.c == 0) t.b = 1;
    max_delta =
        std::max(max_delta, std::fabs(mcnemar(t) - oracle_mcnemar_exact(t.b, t.c)));
    ++cases;
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 20);
    std::vector<double> d;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      double v;
      const int kind = rng.uniform_int(0, 5);
      if (kind == 0) v = 0.0;
      else if (kind <= 2) v = rng.uniform_int(1, 6) * 0.5;
      else v = rng.uniform_real(-4.0, 4.0);
      if (kind <= 2 && rng.chance(0.5)) v = -v;
      if (v != 0.0) any = true;
      d.push_back(v);
    }
    if (!any) d[0] = 1.0;
    max_delta =
        std::max(max_delta, std::fabs(wilcoxon_signed_rank(d) - oracle_wilcoxon_exact(d)));
    ++cases;
  }

  ctx.note(std::to_string(cases) + " cases (exhaustive small sizes plus 2000 random), "
           "max |delta p| = " + num(max_delta, 17));
  return max_delta == 0.0;
}

// ===== Criterion 6: metric worked examples =====

bool criterion_worked_examples(Ctx& ctx) {
  Puzzle p;
  p.id = "worked-two-step";
  p.category = Category::Icon;
  p.image_w = 400;
  p.image_h = 400;
  TruthStep first, second;
  first.region = Region::circle({100, 100}, 20);
  second.region = Region::box({200, 200}, {240, 240});
  p.truth = {first, second};

  const auto click = [](double x, double y) {
    ActionStep s;
    s.coordinate = {x, y};
    return s;
  };
  const std::vector<ActionStep> in_order = {click(103, 104), click(220, 220)};
  const std::vector<ActionStep> swapped = {click(220, 220), click(103, 104)};

  bool ok = true;
  const SequenceVerdict good = sequence_verdict(in_order, p);
  if (!good.matched) {
    ctx.note("the in-order two-click example should match");
    ok = false;
  }
  if (sequence_verdict(swapped, p).matched) {
    ctx.note("swapping the click order must break the match (order sensitivity)");
    ok = false;
  }
  const double rate = acc_rate({good, good, sequence_verdict(swapped, p)});
  if (rate != 2.0 / 3.0) {
    ctx.note("acc_rate over {hit, hit, miss} expected 2/3, got " + num(rate, 12));
    ok = false;
  }
  const double l2 = l2_distance(in_order, p);
  if (std::fabs(l2 - 2.5) > 1e-12) {
    ctx.note("mean center distance expected 2.5 (5.0 and 0.0), got " + num(l2, 12));
    ok = false;
  }
  if (count_tokens("click the red circle") != 4) {
    ctx.note("token count of a four-word instruction should be 4");
    ok = false;
  }

  // Published per-model means on the Icon cohort: accuracy, reasoning tokens,
  // reasoning steps. The cost-normalized accuracy endpoints must land exactly
  // on 1.0 (Gemini-2.0-Flash) and 0.0 (the zero-accuracy members).
  const std::vector<EfficiencyInput> icon = {
      {"gemini-2.5-pro", 59.30, 179.03, 5.47}, {"gpt-o3", 22.00, 134.99, 4.87},
      {"claude-4-opus", 17.65, 124.74, 6.21},  {"gpt-4o", 9.52, 88.81, 6.16},
      {"gpt-5-nano", 0.0, 121.93, 5.11},       {"gemini-2.0-flash", 36.33, 81.16, 3.34},
      {"qwen-2.5vl-72b", 0.0, 71.93, 5.13},
  };
  const std::map<std::string, double> norm = efficiency(icon).normalized();
  if (norm.at("gemini-2.0-flash") != 1.0) {
    ctx.note("Gemini-2.0-Flash must score exactly 1.0 on the Icon cohort, got " +
             num(norm.at("gemini-2.0-flash"), 12));
    ok = false;
  }
  if (norm.at("gpt-5-nano") != 0.0 || norm.at("qwen-2.5vl-72b") != 0.0) {
    ctx.note("zero-accuracy members must score exactly 0.0");
    ok = false;
  }
  if (std::fabs(norm.at("gemini-2.5-pro") - 0.843471) > 1e-5) {
    ctx.note("interior member drifted: gemini-2.5-pro expected 0.843471, got " +
             num(norm.at("gemini-2.5-pro"), 6));
    ok = false;
  }

  // Three-instance trajectory-complexity example; the closed form is
  // sigmoid(-1/12).
  const std::vector<TciFeatures> group = {
      {2, 1, 0, 4, 40}, {0, 3, 2, 5, 50}, {1, 2, 1, 6, 60}};
  const double t = tci(group);
  const double expect = 1.0 / (1.0 + std::exp(1.0 / 12.0));
  if (std::fabs(t - expect) > 1e-12) {
    ctx.note("three-instance complexity expected " + num(expect, 12) + ", got " +
             num(t, 12));
    ok = false;
  }

  if (ok)
    ctx.note("sequence, distance, token, efficiency-endpoint, and complexity "
             "examples all hold");
  return ok;
}

// ===== Criterion 7: solver oracles =====

bool criterion_solvers(Ctx& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  int disagreements = 0;

  Rng rng(5150);
  int with_win = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int size = 7 + 2 * rng.uniform_int(0, 2);
    const int run_length = rng.uniform_int(4, 6);
    SymbolGrid g;
    g.rows = size;
    g.cols = size;
    g.cells.assign(static_cast<std::size_t>(size * size), ".");
    for (int i = 0; i < size * size; ++i) {
      const int roll = rng.uniform_int(0, 9);
      if (roll < 3) g.cells[i] = "x";
      else if (roll < 5) g.cells[i] = "o";
    }
    const auto got = solve_gobang(g, "x", run_length);
    const auto expect = oracle_gobang(g, "x", run_length);
    if (got.has_value() != expect.has_value() || (got && !(*got == *expect)))
      ++disagreements;
    if (got) ++with_win;
  }

  Rng m3(31337);
  const std::vector<std::string> symbols = {"a", "b", "c", "d"};
  int with_move = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = m3.uniform_int(3, 7);
    const int cols = m3.uniform_int(3, 7);
    const int palette = m3.uniform_int(2, 4);
    SymbolGrid g;
    g.rows = rows;
    g.cols = cols;
    for (int i = 0; i < rows * cols; ++i)
      g.cells.push_back(symbols[static_cast<std::size_t>(m3.uniform_int(0, palette - 1))]);
    const auto got = solve_match3(g);
    const auto expect = oracle_match3(g);
    if (got.has_value() != expect.has_value() || (got && !(*got == *expect)))
      ++disagreements;
    if (got) ++with_move;
  }

  const double elapsed = ms_since(t0);
  ctx.note("1000 line-completion boards (" + std::to_string(with_win) +
           " winnable) and 1000 swap boards (" + std::to_string(with_move) +
           " movable), " + std::to_string(disagreements) + " disagreements, " +
           num(elapsed, 0) + " ms");
  return disagreements == 0 && with_win > 100 && with_move > 500 && elapsed < 10000.0;
}

// ===== Criterion 8: fixture corpus end to end =====

bool criterion_fixture_pipeline(Ctx& ctx) {
  const fs::path fx = ctx.work / "fixture";
  const fs::path run1 = ctx.work / "solve-run1";
  const fs::path run2 = ctx.work / "solve-run2";
  const fs::path eval = ctx.work / "eval.json";

  if (run_cli(ctx, "gen-fixture --out \"" + fx.string() + "\" --count 50") != 0) {
    ctx.note("gen-fixture exited nonzero");
    return false;
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::string solve_text;
  if (run_cli(ctx, "solve --corpus \"" + fx.string() + "\" --out \"" +
                       run1.string() + "\"", &solve_text) != 0) {
    ctx.note("solve exited nonzero: " + solve_text);
    return false;
  }
  const double solve_ms = ms_since(t0);
  if (run_cli(ctx, "solve --corpus \"" + fx.string() + "\" --out \"" +
                       run2.string() + "\"") != 0) {
    ctx.note("second solve exited nonzero");
    return false;
  }

  const json outcomes = load_json(run1 / "outcomes.json");
  const int solved = outcomes["solved_count"], total = outcomes["total"];
  bool ok = true;
  if (solved != 50 || total != 50) {
    ctx.note("expected 50/50 solved, got " + std::to_string(solved) + "/" +
             std::to_string(total));
    ok = false;
  }

  for (const char* name :
       {"predictions.jsonl", "trace_log.jsonl", "outcomes.json", "report.json"}) {
    if (read_text_file((run1 / name).string()) != read_text_file((run2 / name).string())) {
      ctx.note(std::string(name) + " differs between two identical runs");
      ok = false;
    }
  }

  if (run_cli(ctx, "evaluate --corpus \"" + fx.string() + "\" --predictions \"" +
                       (run1 / "predictions.jsonl").string() + "\" --out \"" +
                       eval.string() + "\"") != 0) {
    ctx.note("evaluate exited nonzero");
    return false;
  }
  const json solve_report = load_json(run1 / "report.json");
  const json eval_report = load_json(eval);
  if (solve_report["rows"] != eval_report["rows"]) {
    ctx.note("solver-side and evaluator-side metric rows disagree");
    ok = false;
  }
  for (const json& row : eval_report["rows"])
    if (row["acc_rate"].get<double>() != 1.0) {
      ctx.note("evaluated solve rate below 1.0 for " + row["category"].get<std::string>());
      ok = false;
      break;
    }

  ctx.note("50-puzzle fixture solved 50/50, scripted replies only, solve in " +
           num(solve_ms, 0) + " ms, reruns byte-identical, evaluator agrees");
  return ok && solve_ms < 5000.0;
}

// ===== Criterion 9: region containment =====

bool criterion_geometry(Ctx& ctx) {
  Rng rng(20240817);
  int checked = 0, inside_seen = 0, disagreements = 0;
  while (checked < 10000) {
    const std::vector<Point> poly = random_simple_polygon(rng);
    if (!polygon_is_simple(poly)) continue;
    const Region region = Region::polygon(poly);
    for (int probe = 0; probe < 20 && checked < 10000; ++probe) {
      Point p;
      const int kind = rng.uniform_int(0, 2);
      if (kind == 0) {
        p = {rng.uniform_real(0.0, 300.0), rng.uniform_real(0.0, 300.0)};
      } else if (kind == 1) {
        const Point& v = poly[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(poly.size()) - 1))];
        p = {v.x + rng.uniform_real(-2.0, 2.0), v.y + rng.uniform_real(-2.0, 2.0)};
      } else {
        p = {region.center.x + rng.uniform_real(-10.0, 10.0),
             region.center.y + rng.uniform_real(-10.0, 10.0)};
      }
      const bool lib = region_contains(region, p);
      if (lib != oracle_polygon_contains(poly, p)) ++disagreements;
      if (lib) ++inside_seen;
      ++checked;
    }
  }

  bool circle_ok = true;
  const Region circle = Region::circle({10, 10}, 5);
  circle_ok = circle_ok && circle.contains({13, 14});   // 3-4-5: exactly on the rim
  circle_ok = circle_ok && circle.contains({15, 10});
  circle_ok = circle_ok && circle.contains({10, 5});
  circle_ok = circle_ok && !circle.contains({15.0001, 10});
  circle_ok = circle_ok && !circle.contains({13.01, 14.01});

  ctx.note("10000 polygon probes, " + std::to_string(disagreements) +
           " disagreements (" + std::to_string(inside_seen) + " inside); circle "
           "boundary " + std::string(circle_ok ? "inclusive" : "WRONG"));
  return disagreements == 0 && inside_seen > 1000 && inside_seen < 9000 && circle_ok;
}

// ===== Criterion 10: credentials, runtime, reproducibility =====

bool criterion_hygiene(Ctx& ctx) {
  bool ok = true;
  if (std::getenv("CAPBENCH_API_KEY") != nullptr) {
    ctx.note("CAPBENCH_API_KEY is set; the gate must pass without credentials");
    ok = false;
  }

  const fs::path report = ctx.root / "data" / "reference" / "model_metrics.json";
  const fs::path out_a = ctx.work / "repro-a.json";
  const fs::path out_b = ctx.work / "repro-b.json";
  if (run_cli(ctx, "fit --report \"" + report.string() + "\" --out \"" +
                       out_a.string() + "\"") != 0 ||
      run_cli(ctx, "fit --report \"" + report.string() + "\" --out \"" +
                       out_b.string() + "\"") != 0) {
    ctx.note("fit exited nonzero during the reproducibility check");
    return false;
  }
  if (read_text_file(out_a.string()) != read_text_file(out_b.string())) {
    ctx.note("identical fit invocations produced different bytes");
    ok = false;
  }

  const double elapsed = ms_since(ctx.start) / 1000.0;
  if (elapsed >= 120.0) {
    ctx.note("gate took " + num(elapsed, 1) + " s; the budget is 120 s");
    ok = false;
  }
  if (ok)
    ctx.note("no credentials in the environment, byte-identical reruns, " +
             num(elapsed, 1) + " s elapsed");
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, root = ".";
  std::set<int> skip, only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--cli") cli = next();
    else if (arg == "--root") root = next();
    else if (arg == "--skip") skip.insert(std::stoi(next()));
    else if (arg == "--only") only.insert(std::stoi(next()));
    else {
      std::cerr << "usage: acceptance --cli PATH [--root PATH] [--skip N] [--only N]\n";
      return 2;
    }
  }
  if (cli.empty()) {
    std::cerr << "usage: acceptance --cli PATH [--root PATH] [--skip N] [--only N]\n";
    return 2;
  }

  Ctx ctx;
  ctx.cli = fs::absolute(cli);
  ctx.root = fs::absolute(root);
  ctx.start = std::chrono::steady_clock::now();
  ctx.work = fs::temp_directory_path() /
             ("capbench-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(ctx.work);

  struct Criterion {
    int id;
    const char* title;
    std::function<bool(Ctx&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "per-model aggregates reproduce the published power-law constants",
       criterion_power_law},
      {2, "per-model aggregates reproduce the published linear laws",
       criterion_linear_laws},
      {3, "per-model accuracy regresses on grounding distance with R2 >= 0.90",
       criterion_accuracy_l2},
      {4, "synthetic recovery: power law to 1e-6, straight lines to 1e-10",
       criterion_recovery},
      {5, "exact test p-values match brute-force enumeration bit for bit",
       criterion_exact_tests},
      {6, "metric worked examples and efficiency endpoints hold exactly",
       criterion_worked_examples},
      {7, "grid solvers agree with enumeration oracles on random boards",
       criterion_solvers},
      {8, "a 50-puzzle fixture corpus solves end to end, byte-reproducibly",
       criterion_fixture_pipeline},
      {9, "region containment matches an independent crossing-test oracle",
       criterion_geometry},
      {10, "no credentials, bounded runtime, reproducible outputs",
       criterion_hygiene},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    if (skip.count(c.id)) {
      std::cout << "[SKIP] criterion " << c.id << ": " << c.title << "\n";
      continue;
    }
    ctx.detail.clear();
    bool pass = false;
    try {
      pass = c.fn(ctx);
    } catch (const std::exception& e) {
      ctx.note(std::string("exception: ") + e.what());
    }
    if (!pass) ++failures;
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": "
              << c.title << "\n";
    for (const std::string& line : ctx.detail) std::cout << "       " << line << "\n";
  }

  fs::remove_all(ctx.work);
  if (failures > 0)
    std::cout << failures << " criterion(s) failed\n";
  return failures > 0 ? 1 : 0;
}
