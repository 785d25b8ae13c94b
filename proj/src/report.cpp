#include "capbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>
#include <tuple>

#include "capbench/ioutil.hpp"
#include "capbench/sha256.hpp"
#include "capbench/version.hpp"

namespace capbench {

using nlohmann::json;

// ===== RunManifest =====

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config_digest"] = config_digest;
  j["corpus_digest"] = corpus_digest;
  j["seed"] = seed;
  j["deterministic"] = deterministic;
  j["timestamp"] = timestamp;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.value("command", std::string());
  m.tool_version = j.value("tool_version", std::string());
  m.config_digest = j.value("config_digest", std::string("-"));
  m.corpus_digest = j.value("corpus_digest", std::string("-"));
  m.seed = j.value("seed", std::uint64_t{41});
  m.deterministic = j.value("deterministic", true);
  m.timestamp = j.value("timestamp", std::string());
  return m;
}

RunManifest make_manifest(const std::string& command, std::uint64_t seed,
                          bool deterministic) {
  RunManifest m;
  m.command = command;
  m.tool_version = kToolVersion;
  m.seed = seed;
  m.deterministic = deterministic;
  if (!deterministic) {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
    m.timestamp = buf;
  }
  return m;
}

std::string corpus_digest(const Corpus& corpus) {
  std::string bytes;
  for (const Puzzle& p : corpus.puzzles) bytes += puzzle_to_json(p).dump() + "\n";
  return sha256_hex(bytes);
}

// ===== Report serialization =====

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

double mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / xs.size();
}

Category category_from(const json& j, const char* key) {
  const std::string s = j.at(key).get<std::string>();
  const std::optional<Category> c = category_from_string(s);
  if (!c) throw ReportError("unknown category: '" + s + "'");
  return *c;
}

Condition condition_from(const json& j, const char* key) {
  const std::string s = j.at(key).get<std::string>();
  const std::optional<Condition> c = condition_from_string(s);
  if (!c) throw ReportError("unknown condition: '" + s + "'");
  return *c;
}

}  // namespace

const ReportRow* MetricReport::find_row(const std::string& model_id, Category category,
                                        Condition condition) const {
  for (const ReportRow& r : rows)
    if (r.model_id == model_id && r.category == category && r.condition == condition)
      return &r;
  return nullptr;
}

json MetricReport::to_json() const {
  json j;
  j["manifest"] = manifest.to_json();
  json rows_json = json::array();
  for (const ReportRow& r : rows) {
    json row;
    row["model_id"] = r.model_id;
    row["category"] = to_string(r.category);
    row["condition"] = to_string(r.condition);
    row["puzzle_count"] = r.puzzle_count;
    row["acc_rate"] = r.acc_rate;
    row["l2"] = opt_json(r.l2);
    row["steps"] = opt_json(r.steps);
    row["length"] = opt_json(r.length);
    row["score"] = opt_json(r.score);
    row["efficiency"] = opt_json(r.efficiency);
    row["tci"] = opt_json(r.tci);
    rows_json.push_back(row);
  }
  j["rows"] = rows_json;
  json verdicts_json = json::array();
  for (const VerdictRow& v : verdicts) {
    json row;
    row["model_id"] = v.model_id;
    row["puzzle_id"] = v.puzzle_id;
    row["condition"] = to_string(v.condition);
    row["matched"] = v.matched;
    row["length_match"] = v.length_match;
    row["l2"] = opt_json(v.l2);
    verdicts_json.push_back(row);
  }
  j["verdicts"] = verdicts_json;
  return j;
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport rep;
  rep.manifest = RunManifest::from_json(j.at("manifest"));
  for (const json& row : j.at("rows")) {
    ReportRow r;
    r.model_id = row.at("model_id").get<std::string>();
    r.category = category_from(row, "category");
    r.condition = condition_from(row, "condition");
    r.puzzle_count = row.value("puzzle_count", 0);
    r.acc_rate = row.at("acc_rate").get<double>();
    r.l2 = opt_from(row, "l2");
    r.steps = opt_from(row, "steps");
    r.length = opt_from(row, "length");
    r.score = opt_from(row, "score");
    r.efficiency = opt_from(row, "efficiency");
    r.tci = opt_from(row, "tci");
    rep.rows.push_back(std::move(r));
  }
  for (const json& row : j.value("verdicts", json::array())) {
    VerdictRow v;
    v.model_id = row.at("model_id").get<std::string>();
    v.puzzle_id = row.at("puzzle_id").get<std::string>();
    v.condition = condition_from(row, "condition");
    v.matched = row.at("matched").get<bool>();
    v.length_match = row.value("length_match", v.matched);
    v.l2 = opt_from(row, "l2");
    rep.verdicts.push_back(std::move(v));
  }
  return rep;
}

void MetricReport::save(const std::string& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

MetricReport MetricReport::load(const std::string& path) {
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ReportError("report file " + path + ": " + e.what());
  }
}

// ===== Building =====

MetricReport build_report(const Corpus& corpus,
                          const std::vector<PredictionRecord>& predictions,
                          const RunManifest& manifest,
                          const BuildReportOptions& options) {
  if (predictions.empty()) throw ReportError("no predictions to evaluate");

  MetricReport rep;
  rep.manifest = manifest;

  struct Item {
    const PredictionRecord* rec;
    const Puzzle* puzzle;
    SequenceVerdict verdict;
  };
  std::vector<Item> items;
  std::vector<std::string> unresolved;
  for (const PredictionRecord& rec : predictions) {
    const Puzzle* p = corpus.find(rec.puzzle_id);
    if (p == nullptr) {
      unresolved.push_back(rec.puzzle_id);
      continue;
    }
    items.push_back({&rec, p, sequence_verdict(rec.predicted, *p)});
  }
  if (!unresolved.empty() && !options.allow_partial) {
    std::string ids;
    for (std::size_t i = 0; i < unresolved.size(); ++i)
      ids += (i ? ", " : "") + unresolved[i];
    throw ReportError("predictions reference unknown puzzle ids: " + ids);
  }
  if (items.empty()) throw ReportError("no predictions matched the corpus");

  for (const Item& it : items)
    rep.verdicts.push_back({it.rec->model_id, it.rec->puzzle_id, it.rec->condition,
                            it.verdict.matched, it.verdict.length_match,
                            it.verdict.mean_l2});

  // (model, condition, category) -> items; map order fixes the row order.
  using Key = std::tuple<std::string, int, int>;
  std::map<Key, std::vector<const Item*>> groups;
  for (const Item& it : items)
    groups[{it.rec->model_id, static_cast<int>(it.rec->condition),
            static_cast<int>(it.puzzle->category)}]
        .push_back(&it);

  // Population features per (category, condition) for the TCI baseline.
  std::map<std::pair<int, int>, std::vector<TciFeatures>> populations;
  for (const Item& it : items) {
    if (!it.rec->trace || it.rec->trace->empty()) continue;
    const TciFeatures f = extract_tci_features(*it.rec->trace, options.lexicon);
    if (f.steps > 0.0 && f.tokens > 0.0)
      populations[{static_cast<int>(it.puzzle->category),
                   static_cast<int>(it.rec->condition)}]
          .push_back(f);
  }

  for (const auto& [key, members] : groups) {
    ReportRow row;
    row.model_id = std::get<0>(key);
    row.condition = static_cast<Condition>(std::get<1>(key));
    row.category = static_cast<Category>(std::get<2>(key));
    row.puzzle_count = static_cast<int>(members.size());

    int matched = 0;
    std::vector<double> l2s, steps, lengths;
    std::vector<TciFeatures> features;
    for (const Item* it : members) {
      if (it->verdict.matched) ++matched;
      if (it->verdict.mean_l2) l2s.push_back(*it->verdict.mean_l2);
      if (it->rec->trace && !it->rec->trace->empty()) {
        steps.push_back(static_cast<double>(reasoning_steps(*it->rec->trace)));
        lengths.push_back(static_cast<double>(reasoning_length(*it->rec->trace)));
        const TciFeatures f = extract_tci_features(*it->rec->trace, options.lexicon);
        if (f.steps > 0.0 && f.tokens > 0.0) features.push_back(f);
      }
    }
    row.acc_rate = static_cast<double>(matched) / row.puzzle_count;
    if (!l2s.empty()) row.l2 = mean(l2s);
    if (!steps.empty()) {
      row.steps = mean(steps);
      row.length = mean(lengths);
    }
    if (!features.empty()) {
      const auto& pop = populations[{std::get<2>(key), std::get<1>(key)}];
      try {
        row.tci = tci(features, TciPopulation::from(pop));
      } catch (const MetricError&) {
        row.tci.reset();
      }
    }
    rep.rows.push_back(std::move(row));
  }

  // Per-category efficiency over the model cohort sharing that condition.
  std::map<std::pair<int, int>, std::vector<EfficiencyInput>> cohorts;
  for (const ReportRow& row : rep.rows) {
    if (!row.length || !row.steps || *row.length <= 0.0 || *row.steps <= 0.0) continue;
    cohorts[{static_cast<int>(row.category), static_cast<int>(row.condition)}].push_back(
        {row.model_id, row.acc_rate, *row.length, *row.steps});
  }
  for (const auto& [key, cohort] : cohorts) {
    if (cohort.size() < 2) continue;
    const std::map<std::string, double> normalized = efficiency(cohort).normalized();
    for (ReportRow& row : rep.rows) {
      if (static_cast<int>(row.category) != key.first ||
          static_cast<int>(row.condition) != key.second)
        continue;
      const auto it = normalized.find(row.model_id);
      if (it != normalized.end()) row.efficiency = it->second;
    }
  }

  return rep;
}

// ===== Score merging =====

void merge_scores(MetricReport& report, const json& score_file) {
  std::map<std::tuple<std::string, int, int>, std::vector<double>> by_row;
  for (const json& s : score_file.at("scores")) {
    const std::string model = s.at("model_id").get<std::string>();
    const Condition cond = condition_from(s, "condition");
    const Category cat = category_from(s, "category");
    by_row[{model, static_cast<int>(cond), static_cast<int>(cat)}].push_back(
        s.at("value").get<double>());
  }
  for (ReportRow& row : report.rows) {
    const auto it = by_row.find({row.model_id, static_cast<int>(row.condition),
                                 static_cast<int>(row.category)});
    if (it != by_row.end()) row.score = mean(it->second);
  }
}

// ===== Rendering =====

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct MetricColumn {
  const char* title;
  std::optional<double> (*get)(const ReportRow&);
};

const MetricColumn kMetricColumns[] = {
    {"AccRate (fraction solved)", [](const ReportRow& r) {
       return std::optional<double>(r.acc_rate);
     }},
    {"L2 distance (pixels)", [](const ReportRow& r) { return r.l2; }},
    {"Reasoning steps", [](const ReportRow& r) { return r.steps; }},
    {"Reasoning length (tokens)", [](const ReportRow& r) { return r.length; }},
    {"Judge score (0-5)", [](const ReportRow& r) { return r.score; }},
    {"Efficiency (normalized)", [](const ReportRow& r) { return r.efficiency; }},
    {"TCI", [](const ReportRow& r) { return r.tci; }},
};

}  // namespace

std::string render_text(const MetricReport& rep) {
  std::ostringstream out;
  out << "command: " << rep.manifest.command << "\n"
      << "tool: " << rep.manifest.tool_version << "  seed: " << rep.manifest.seed
      << "\n"
      << "corpus: " << rep.manifest.corpus_digest << "\n";

  std::set<std::string> model_set;
  for (const ReportRow& r : rep.rows) model_set.insert(r.model_id);
  const std::vector<std::string> models(model_set.begin(), model_set.end());

  std::size_t model_width = 5;
  for (const std::string& m : models) model_width = std::max(model_width, m.size());

  for (const MetricColumn& col : kMetricColumns) {
    for (const Condition cond :
         {Condition::WithReasoning, Condition::WithoutReasoning}) {
      // Which categories have any data for this metric and condition?
      std::vector<Category> present;
      for (const Category c : all_categories()) {
        bool any = false;
        for (const std::string& m : models) {
          const ReportRow* row = rep.find_row(m, c, cond);
          if (row != nullptr && col.get(*row)) any = true;
        }
        if (any) present.push_back(c);
      }
      if (present.empty()) continue;

      out << "\n" << col.title << " [" << to_string(cond) << "]\n";
      out << std::string(model_width, ' ');
      for (const Category c : present) {
        const std::string name = to_string(c);
        out << "  " << std::string(name.size() < 9 ? 9 - name.size() : 0, ' ') << name;
      }
      out << "\n";
      for (const std::string& m : models) {
        out << m << std::string(model_width - m.size(), ' ');
        for (const Category c : present) {
          const ReportRow* row = rep.find_row(m, c, cond);
          const std::optional<double> v = row ? col.get(*row) : std::nullopt;
          const std::string cell = v ? fixed4(*v) : "-";
          const std::size_t w = std::max<std::size_t>(9, to_string(c).size());
          out << "  " << std::string(w > cell.size() ? w - cell.size() : 0, ' ') << cell;
        }
        out << "\n";
      }
    }
  }
  return out.str();
}

json radar_export(const MetricReport& rep) {
  std::set<std::string> model_set;
  std::set<int> cond_set, cat_set;
  for (const ReportRow& r : rep.rows) {
    model_set.insert(r.model_id);
    cond_set.insert(static_cast<int>(r.condition));
    cat_set.insert(static_cast<int>(r.category));
  }
  std::vector<Category> cats;
  for (const Category c : all_categories())
    if (cat_set.count(static_cast<int>(c))) cats.push_back(c);

  json out;
  json names = json::array();
  for (const Category c : cats) names.push_back(to_string(c));
  out["metric"] = "acc_rate";
  out["categories"] = names;
  json series = json::array();
  for (const std::string& m : model_set) {
    for (const int cond : cond_set) {
      json values = json::array();
      bool any = false;
      for (const Category c : cats) {
        const ReportRow* row = rep.find_row(m, c, static_cast<Condition>(cond));
        if (row != nullptr) {
          values.push_back(row->acc_rate);
          any = true;
        } else {
          values.push_back(nullptr);
        }
      }
      if (!any) continue;
      series.push_back({{"model_id", m},
                        {"condition", to_string(static_cast<Condition>(cond))},
                        {"values", values}});
    }
  }
  out["series"] = series;
  return out;
}

}  // namespace capbench
