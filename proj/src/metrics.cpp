#include "capbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <nlohmann/json.hpp>

#include "capbench/ioutil.hpp"

using nlohmann::json;

namespace capbench {

LengthMismatchError::LengthMismatchError(std::size_t predicted,
                                         std::size_t truth)
    : MetricError("prediction has " + std::to_string(predicted) +
                  " steps but truth has " + std::to_string(truth)),
      predicted_len(predicted),
      truth_len(truth) {}

// ===== Sequence scoring =====

static Point grounded_coordinate(const ActionStep& step,
                                 const TruthStep& truth) {
  if (truth.kind == ActionKind::Drag && step.end) return *step.end;
  return step.coordinate;
}

SequenceVerdict sequence_verdict(const std::vector<ActionStep>& predicted,
                                 const Puzzle& puzzle) {
  SequenceVerdict v;
  v.puzzle_id = puzzle.id;
  v.length_match = predicted.size() == puzzle.truth.size();
  if (!v.length_match) {
    v.matched = false;
    return v;
  }
  bool all_ok = true;
  double l2_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const TruthStep& t = puzzle.truth[i];
    StepVerdict sv;
    sv.kind_match = predicted[i].kind == t.kind;
    const Point grounded = grounded_coordinate(predicted[i], t);
    sv.region_hit = t.region.contains(grounded);
    if (t.start_region)
      sv.region_hit =
          sv.region_hit && t.start_region->contains(predicted[i].coordinate);
    sv.l2 = distance(grounded, t.region.center);
    l2_sum += sv.l2;
    all_ok = all_ok && sv.kind_match && sv.region_hit;
    v.per_step.push_back(sv);
  }
  v.matched = all_ok;
  if (!puzzle.truth.empty())
    v.mean_l2 = l2_sum / static_cast<double>(puzzle.truth.size());
  return v;
}

bool sequence_match(const std::vector<ActionStep>& predicted,
                    const Puzzle& puzzle) {
  return sequence_verdict(predicted, puzzle).matched;
}

double acc_rate(const std::vector<SequenceVerdict>& verdicts) {
  if (verdicts.empty())
    throw MetricError("acc_rate over zero puzzles is undefined");
  std::size_t matched = 0;
  for (const SequenceVerdict& v : verdicts)
    if (v.matched) ++matched;
  return static_cast<double>(matched) / static_cast<double>(verdicts.size());
}

double l2_distance(const std::vector<ActionStep>& predicted,
                   const Puzzle& puzzle) {
  if (predicted.size() != puzzle.truth.size())
    throw LengthMismatchError(predicted.size(), puzzle.truth.size());
  if (puzzle.truth.empty())
    throw MetricError("l2_distance over zero steps is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    sum += distance(grounded_coordinate(predicted[i], puzzle.truth[i]),
                    puzzle.truth[i].region.center);
  return sum / static_cast<double>(predicted.size());
}

// ===== Tokenizer =====

static bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x0009:
    case 0x000A:
    case 0x000B:
    case 0x000C:
    case 0x000D:
    case 0x0020:
    case 0x0085:
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes the next UTF-8 scalar; malformed bytes are consumed one at a time
// and returned verbatim so dirty traces never fail.
static char32_t next_scalar(const std::string& s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

std::size_t count_tokens(const std::string& text) {
  std::size_t tokens = 0;
  bool in_token = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_scalar(text, i);
    if (is_unicode_space(cp)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++tokens;
    }
  }
  return tokens;
}

std::size_t reasoning_steps(const ReasoningTrace& trace) {
  return trace.size();
}

std::size_t reasoning_length(const ReasoningTrace& trace) {
  std::size_t total = 0;
  for (const std::string& step : trace) total += count_tokens(step);
  return total;
}

// ===== Efficiency =====

std::map<std::string, double> CohortStats::normalized() const {
  std::map<std::string, double> out;
  for (const EfficiencyEntry& e : members) out[e.model_id] = e.normalized;
  return out;
}

CohortStats efficiency(const std::vector<EfficiencyInput>& cohort) {
  if (cohort.size() < 2)
    throw MetricError("efficiency needs a cohort of at least two models");
  CohortStats stats;
  for (const EfficiencyInput& m : cohort) {
    if (!(m.length > 0.0) || !(m.steps > 0.0))
      throw MetricError("efficiency requires positive length and steps (" +
                        m.model_id + ")");
    stats.mean_length += m.length;
    stats.mean_steps += m.steps;
  }
  stats.mean_length /= static_cast<double>(cohort.size());
  stats.mean_steps /= static_cast<double>(cohort.size());

  for (const EfficiencyInput& m : cohort) {
    EfficiencyEntry e;
    e.model_id = m.model_id;
    e.raw = m.acc / (0.5 * m.length / stats.mean_length +
                     0.5 * m.steps / stats.mean_steps);
    stats.members.push_back(e);
  }
  double lo = stats.members[0].raw, hi = stats.members[0].raw;
  for (const EfficiencyEntry& e : stats.members) {
    lo = std::min(lo, e.raw);
    hi = std::max(hi, e.raw);
  }
  if (hi == lo) {
    stats.degenerate = true;
    for (EfficiencyEntry& e : stats.members) e.normalized = 1.0;
  } else {
    for (EfficiencyEntry& e : stats.members)
      e.normalized = (e.raw - lo) / (hi - lo);
  }
  return stats;
}

// ===== Trajectory complexity =====

TciLexicon TciLexicon::defaults() {
  TciLexicon lex;
  lex.backtracking_terms = {"but",      "however", "wait",      "instead",
                            "actually", "re-check", "correction"};
  lex.coordinate_patterns = {
      R"(\(\s*-?\d+(?:\.\d+)?\s*,\s*-?\d+(?:\.\d+)?\s*\))"};
  lex.grid_index_patterns = {R"(\b(?:row|column|col)\s+\d+\b)",
                             R"(\b[A-H][1-9]\b)"};
  return lex;
}

TciLexicon TciLexicon::load(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  TciLexicon lex;
  lex.backtracking_terms =
      j.at("backtracking_terms").get<std::vector<std::string>>();
  lex.coordinate_patterns =
      j.at("coordinate_patterns").get<std::vector<std::string>>();
  lex.grid_index_patterns =
      j.at("grid_index_patterns").get<std::vector<std::string>>();
  return lex;
}

static std::size_t count_matches(const std::string& text,
                                 const std::regex& re) {
  return static_cast<std::size_t>(std::distance(
      std::sregex_iterator(text.begin(), text.end(), re),
      std::sregex_iterator()));
}

static std::string escape_for_regex(const std::string& word) {
  static const std::string specials = R"(\.^$|()[]{}*+?)";
  std::string out;
  for (char c : word) {
    if (specials.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

TciFeatures extract_tci_features(const ReasoningTrace& trace,
                                 const TciLexicon& lexicon) {
  std::string text;
  for (const std::string& step : trace) {
    if (!text.empty()) text += '\n';
    text += step;
  }
  TciFeatures f;
  for (const std::string& term : lexicon.backtracking_terms) {
    const std::regex re("\\b" + escape_for_regex(term) + "\\b",
                        std::regex::icase);
    f.backtracking += static_cast<double>(count_matches(text, re));
  }
  for (const std::string& pattern : lexicon.coordinate_patterns) {
    const std::regex re(pattern, std::regex::icase);
    f.coordinates += static_cast<double>(count_matches(text, re));
  }
  for (const std::string& pattern : lexicon.grid_index_patterns) {
    const std::regex re(pattern, std::regex::icase);
    f.grid_indices += static_cast<double>(count_matches(text, re));
  }
  f.steps = static_cast<double>(reasoning_steps(trace));
  f.tokens = static_cast<double>(reasoning_length(trace));
  return f;
}

TciPopulation TciPopulation::from(const std::vector<TciFeatures>& group) {
  TciPopulation p;
  if (group.empty()) return p;
  for (const TciFeatures& f : group) {
    p.mean_backtracking += f.backtracking;
    p.mean_coordinates += f.coordinates;
    p.mean_grid_indices += f.grid_indices;
    p.mean_steps += f.steps;
    p.mean_tokens += f.tokens;
  }
  const double n = static_cast<double>(group.size());
  p.mean_backtracking /= n;
  p.mean_coordinates /= n;
  p.mean_grid_indices /= n;
  p.mean_steps /= n;
  p.mean_tokens /= n;
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double tci(const std::vector<TciFeatures>& group) {
  return tci(group, TciPopulation::from(group));
}

double tci(const std::vector<TciFeatures>& group,
           const TciPopulation& population) {
  if (group.empty()) throw MetricError("tci over an empty group is undefined");
  if (!(population.mean_steps > 0.0) || !(population.mean_tokens > 0.0))
    throw MetricError("tci requires positive mean steps and tokens");
  double z_sum = 0.0;
  for (const TciFeatures& f : group) {
    const double numerator = (f.backtracking - population.mean_backtracking) +
                             (f.coordinates - population.mean_coordinates) +
                             (f.grid_indices - population.mean_grid_indices);
    const double denominator = 0.5 * f.steps / population.mean_steps +
                               0.5 * f.tokens / population.mean_tokens;
    if (!(denominator > 0.0))
      throw MetricError("tci instance with zero steps and tokens");
    z_sum += numerator / denominator;
  }
  return sigmoid(z_sum / static_cast<double>(group.size()));
}

}  // namespace capbench
