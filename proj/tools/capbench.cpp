#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <tuple>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capbench/agent.hpp"
#include "capbench/corpus.hpp"
#include "capbench/fixturegen.hpp"
#include "capbench/ioutil.hpp"
#include "capbench/judge.hpp"
#include "capbench/metrics.hpp"
#include "capbench/modelclient.hpp"
#include "capbench/report.hpp"
#include "capbench/sha256.hpp"
#include "capbench/stats.hpp"
#include "capbench/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace capbench;

namespace {

// ===== Shared plumbing =====

// Exit codes: 0 success, 1 domain failure (validation or test rejection),
// 2 usage or environment failure.
int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const StatsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ReportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const JudgeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const AgentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ModelClientError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

std::string file_digest(const std::string& path) {
  return sha256_hex(read_text_file(path));
}

std::string percent1(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ===== validate =====

int cmd_validate(const std::string& corpus_dir) {
  const Corpus corpus = load_corpus(corpus_dir);
  const std::vector<Diagnostic> diags = validate_corpus(corpus);
  for (const Diagnostic& d : diags)
    std::cout << (d.severity == Severity::Error ? "error" : "warning") << ": "
              << d.puzzle_id << ": " << d.message << "\n";
  std::cout << corpus.puzzles.size() << " puzzles, "
            << diags.size() << " diagnostics\n";
  return has_errors(diags) ? 1 : 0;
}

// ===== evaluate =====

int cmd_evaluate(const std::string& corpus_dir, const std::string& predictions_path,
                 const std::string& out_path, bool allow_partial, std::uint64_t seed) {
  const Corpus corpus = load_corpus(corpus_dir);
  const std::vector<PredictionRecord> predictions = load_predictions(predictions_path);

  RunManifest manifest = make_manifest("evaluate", seed, true);
  manifest.corpus_digest = corpus_digest(corpus);

  BuildReportOptions options;
  options.allow_partial = allow_partial;
  const MetricReport report = build_report(corpus, predictions, manifest, options);
  report.save(out_path);
  std::cout << render_text(report);
  std::cout << "\nwrote " << out_path << "\n";
  return 0;
}

// ===== judge =====

struct JudgeSetup {
  JudgeRubric rubric = JudgeRubric::defaults();
  std::vector<std::string> ids = {"judge-1", "judge-2", "judge-3", "judge-4"};
  std::map<std::string, EndpointConfig> endpoints;  // by judge id, live/replay mode
};

JudgeSetup load_judge_setup(const std::string& config_path) {
  JudgeSetup setup;
  if (config_path.empty()) return setup;
  const json j = json::parse(read_text_file(config_path));
  if (j.contains("rubric")) setup.rubric = JudgeRubric::from_json(j["rubric"]);
  if (j.contains("judges")) {
    setup.ids.clear();
    for (const json& entry : j["judges"]) {
      const std::string id = entry.at("id").get<std::string>();
      setup.ids.push_back(id);
      if (entry.contains("endpoint"))
        setup.endpoints[id] = EndpointConfig::from_json(entry["endpoint"]);
    }
  }
  return setup;
}

int cmd_judge(const std::string& corpus_dir, const std::string& predictions_path,
              const std::string& config_path, const std::string& script_path,
              const std::string& replay_path, const std::string& out_path,
              std::string audit_path, std::uint64_t seed) {
  const Corpus corpus = load_corpus(corpus_dir);
  const std::vector<PredictionRecord> predictions = load_predictions(predictions_path);
  const JudgeSetup setup = load_judge_setup(config_path);

  bool deterministic = true;
  std::vector<PanelJudge> judges;
  if (!script_path.empty()) {
    const auto backend = ScriptedBackend::from_file(script_path);
    for (const std::string& id : setup.ids) judges.push_back({id, backend});
  } else if (!replay_path.empty()) {
    for (const std::string& id : setup.ids) {
      const auto it = setup.endpoints.find(id);
      if (it == setup.endpoints.end())
        throw JudgeError("replay mode needs an endpoint config for judge '" + id + "'");
      judges.push_back({id, std::make_shared<ReplayBackend>(it->second, replay_path)});
    }
  } else {
    deterministic = false;
    for (const std::string& id : setup.ids) {
      const auto it = setup.endpoints.find(id);
      if (it == setup.endpoints.end())
        throw JudgeError("live mode needs an endpoint config for judge '" + id + "'");
      judges.push_back({id, std::make_shared<HttpBackend>(it->second)});
    }
  }

  JudgePanel panel(std::move(judges), setup.rubric);
  if (audit_path.empty())
    audit_path = (fs::path(out_path).parent_path() / "judge_audit.jsonl").string();
  fs::remove(audit_path);  // keep reruns byte-identical
  panel.set_audit_log(audit_path);

  RunManifest manifest = make_manifest("judge", seed, deterministic);
  manifest.corpus_digest = corpus_digest(corpus);
  if (!config_path.empty()) manifest.config_digest = file_digest(config_path);

  json scores = json::array();
  int skipped_no_trace = 0, skipped_no_reference = 0, incomplete = 0;
  for (const PredictionRecord& rec : predictions) {
    if (!rec.trace || rec.trace->empty()) {
      ++skipped_no_trace;
      continue;
    }
    const Puzzle* p = corpus.find(rec.puzzle_id);
    if (p == nullptr)
      throw JudgeError("prediction references unknown puzzle id: " + rec.puzzle_id);
    if (!p->reference_reasoning || p->reference_reasoning->empty()) {
      ++skipped_no_reference;
      continue;
    }
    const AggregateScore agg =
        panel.score_reasoning(rec.puzzle_id, *rec.trace, *p->reference_reasoning,
                              p->prompt);
    if (!agg.complete()) ++incomplete;
    json per_judge = json::object();
    for (const JudgeScore& s : panel.last_scores()) per_judge[s.judge_id] = s.value;
    scores.push_back({{"instance_id", rec.puzzle_id},
                      {"model_id", rec.model_id},
                      {"condition", to_string(rec.condition)},
                      {"category", to_string(p->category)},
                      {"value", agg.value},
                      {"judge_count", agg.judge_count},
                      {"panel_size", agg.panel_size},
                      {"missing_judges", agg.missing_judges},
                      {"per_judge", per_judge}});
  }

  json out;
  out["manifest"] = manifest.to_json();
  out["scores"] = scores;
  write_text_file(out_path, out.dump(2) + "\n");
  std::cout << "scored " << scores.size() << " traces with " << panel.panel_size()
            << " judges";
  if (skipped_no_trace) std::cout << ", skipped " << skipped_no_trace << " without traces";
  if (skipped_no_reference)
    std::cout << ", skipped " << skipped_no_reference << " without reference traces";
  if (incomplete) std::cout << ", " << incomplete << " flagged incomplete";
  std::cout << "\nwrote " << out_path << " and " << audit_path << "\n";
  return 0;
}

// ===== stats =====

int cmd_stats(const std::string& report_path, const std::string& out_path,
              std::uint64_t seed) {
  const MetricReport rep = MetricReport::load(report_path);
  RunManifest manifest = make_manifest("stats", seed, true);
  manifest.corpus_digest = rep.manifest.corpus_digest;

  json out;
  out["manifest"] = manifest.to_json();

  // Pair verdicts across conditions per (model, puzzle).
  struct Pair {
    const VerdictRow* wr = nullptr;
    const VerdictRow* wor = nullptr;
  };
  std::map<std::pair<std::string, std::string>, Pair> pairs;
  std::set<std::string> models;
  for (const VerdictRow& v : rep.verdicts) {
    auto& slot = pairs[{v.model_id, v.puzzle_id}];
    (v.condition == Condition::WithReasoning ? slot.wr : slot.wor) = &v;
    models.insert(v.model_id);
  }

  const auto mcnemar_json = [](const PairedBinaryTable& t) {
    json j{{"a", t.a}, {"b", t.b}, {"c", t.c}, {"d", t.d}};
    try {
      j["p"] = mcnemar(t);
    } catch (const StatsError& e) {
      j["p"] = nullptr;
      j["note"] = e.what();
    }
    return j;
  };
  const auto wilcoxon_json = [](const std::vector<double>& diffs) {
    json j{{"n", diffs.size()}};
    if (diffs.empty()) {
      j["p"] = nullptr;
      j["note"] = "no paired distance observations";
      return j;
    }
    try {
      j["p"] = wilcoxon_signed_rank(diffs);
    } catch (const StatsError& e) {
      j["p"] = nullptr;
      j["note"] = e.what();
    }
    return j;
  };

  PairedBinaryTable pooled;
  std::vector<double> pooled_diffs;
  json per_model = json::object();
  for (const std::string& m : models) {
    PairedBinaryTable t;
    std::vector<double> diffs;
    for (const auto& [key, pair] : pairs) {
      if (key.first != m || pair.wr == nullptr || pair.wor == nullptr) continue;
      if (pair.wr->matched && pair.wor->matched) ++t.a;
      else if (pair.wr->matched) ++t.b;
      else if (pair.wor->matched) ++t.c;
      else ++t.d;
      if (pair.wr->l2 && pair.wor->l2) diffs.push_back(*pair.wr->l2 - *pair.wor->l2);
    }
    pooled.a += t.a;
    pooled.b += t.b;
    pooled.c += t.c;
    pooled.d += t.d;
    pooled_diffs.insert(pooled_diffs.end(), diffs.begin(), diffs.end());
    if (t.a + t.b + t.c + t.d > 0)
      per_model[m] = {{"mcnemar", mcnemar_json(t)}, {"wilcoxon_l2", wilcoxon_json(diffs)}};
  }
  const bool have_pairs = pooled.a + pooled.b + pooled.c + pooled.d > 0;
  out["mcnemar"] = have_pairs ? mcnemar_json(pooled) : json(nullptr);
  out["wilcoxon_l2"] = have_pairs ? wilcoxon_json(pooled_diffs) : json(nullptr);
  out["per_model"] = per_model;

  // Accuracy-L2 regression over per-model averages (reasoning condition),
  // accuracy on the 0-100 scale. Models contribute means over the rows where
  // both columns exist.
  std::vector<double> acc, l2;
  json points = json::array();
  for (const std::string& m : models.empty() ? [&] {
         std::set<std::string> s;
         for (const ReportRow& r : rep.rows) s.insert(r.model_id);
         return s;
       }()
                                             : models) {
    std::vector<double> accs, l2s;
    for (const ReportRow& r : rep.rows) {
      if (r.model_id != m || r.condition != Condition::WithReasoning || !r.l2) continue;
      accs.push_back(r.acc_rate * 100.0);
      l2s.push_back(*r.l2);
    }
    if (accs.empty()) continue;
    double am = 0, lm = 0;
    for (double v : accs) am += v;
    for (double v : l2s) lm += v;
    am /= accs.size();
    lm /= l2s.size();
    acc.push_back(am);
    l2.push_back(lm);
    points.push_back({{"id", m}, {"accuracy_percent", am}, {"l2", lm}});
  }
  if (acc.size() >= 3) {
    const LinearFit fit = accuracy_l2_regression(acc, l2);
    for (json& pt : points)
      pt["fitted"] = fit.fitted(pt["accuracy_percent"].get<double>());
    out["accuracy_l2_regression"] = {
        {"slope", fit.slope},     {"intercept", fit.intercept}, {"r2", fit.r2},
        {"p_slope", fit.p_slope}, {"n", fit.n},                 {"points", points}};
    std::cout << "accuracy-L2 regression: slope " << fixed4(fit.slope) << ", R2 "
              << fixed4(fit.r2) << ", p " << fixed4(fit.p_slope) << " (n=" << fit.n
              << ")\n";
  } else {
    out["accuracy_l2_regression"] =
        json{{"note", "needs at least 3 models with accuracy and L2"}};
  }

  // Reasoning improvement, reported on both readings since they differ.
  std::vector<double> wr_means, wor_means;
  for (const std::string& m : models) {
    std::vector<double> wr, wor;
    for (const ReportRow& r : rep.rows) {
      if (r.model_id != m) continue;
      (r.condition == Condition::WithReasoning ? wr : wor).push_back(r.acc_rate);
    }
    if (wr.empty() || wor.empty()) continue;
    double a = 0, b = 0;
    for (double v : wr) a += v;
    for (double v : wor) b += v;
    wr_means.push_back(a / wr.size());
    wor_means.push_back(b / wor.size());
  }
  if (!wr_means.empty()) {
    double wr_all = 0, wor_all = 0;
    for (double v : wr_means) wr_all += v;
    for (double v : wor_means) wor_all += v;
    wr_all /= wr_means.size();
    wor_all /= wor_means.size();
    const double absolute_points = (wr_all - wor_all) * 100.0;
    const json relative =
        wor_all > 0.0 ? json((wr_all - wor_all) / wor_all * 100.0) : json(nullptr);
    out["reasoning_improvement"] = {{"models", wr_means.size()},
                                    {"mean_acc_wr", wr_all},
                                    {"mean_acc_wor", wor_all},
                                    {"absolute_points", absolute_points},
                                    {"relative_percent", relative}};
    std::cout << "reasoning improvement: " << fixed4(absolute_points)
              << " accuracy points (absolute)";
    if (!relative.is_null())
      std::cout << ", " << fixed4(relative.get<double>()) << "% (relative)";
    std::cout << "\n";
  } else {
    out["reasoning_improvement"] = json(nullptr);
  }

  if (have_pairs && !out["mcnemar"].is_null() && !out["mcnemar"]["p"].is_null())
    std::cout << "mcnemar (pooled): b=" << pooled.b << " c=" << pooled.c << " p="
              << fixed4(out["mcnemar"]["p"].get<double>()) << "\n";
  if (have_pairs && !out["wilcoxon_l2"].is_null() && !out["wilcoxon_l2"]["p"].is_null())
    std::cout << "wilcoxon on paired L2 (pooled): n=" << pooled_diffs.size()
              << " p=" << fixed4(out["wilcoxon_l2"]["p"].get<double>()) << "\n";

  write_text_file(out_path, out.dump(2) + "\n");
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ===== fit =====

int cmd_fit(const std::string& report_path, const std::string& out_path,
            bool per_category, std::uint64_t seed) {
  const MetricReport rep = MetricReport::load(report_path);
  RunManifest manifest = make_manifest("fit", seed, true);
  manifest.corpus_digest = rep.manifest.corpus_digest;

  json out;
  out["manifest"] = manifest.to_json();
  out["mode"] = per_category ? "per_category" : "per_model";

  // Fit points; accuracy on the 0-100 scale throughout.
  struct FitPoint {
    std::string id;
    double x = 0.0;
    double y = 0.0;
  };
  std::vector<FitPoint> power_pts, length_pts, tci_pts;

  const auto row_id = [&](const ReportRow& r) {
    return per_category ? r.model_id + "/" + to_string(r.category) : r.model_id;
  };
  if (per_category) {
    for (const ReportRow& r : rep.rows) {
      if (r.condition != Condition::WithReasoning) continue;
      if (r.efficiency) power_pts.push_back({row_id(r), *r.efficiency, r.acc_rate * 100.0});
      if (r.score && r.length) length_pts.push_back({row_id(r), *r.score, *r.length});
      if (r.score && r.tci) tci_pts.push_back({row_id(r), *r.score, *r.tci});
    }
  } else {
    std::set<std::string> models;
    for (const ReportRow& r : rep.rows) models.insert(r.model_id);
    for (const std::string& m : models) {
      std::vector<double> eff, acc, score_l, length, score_t, tci_v;
      for (const ReportRow& r : rep.rows) {
        if (r.model_id != m || r.condition != Condition::WithReasoning) continue;
        if (r.efficiency) {
          eff.push_back(*r.efficiency);
          acc.push_back(r.acc_rate * 100.0);
        }
        if (r.score && r.length) {
          score_l.push_back(*r.score);
          length.push_back(*r.length);
        }
        if (r.score && r.tci) {
          score_t.push_back(*r.score);
          tci_v.push_back(*r.tci);
        }
      }
      const auto mean_of = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
      };
      if (!eff.empty()) power_pts.push_back({m, mean_of(eff), mean_of(acc)});
      if (!score_l.empty()) length_pts.push_back({m, mean_of(score_l), mean_of(length)});
      if (!score_t.empty()) tci_pts.push_back({m, mean_of(score_t), mean_of(tci_v)});
    }
  }

  const auto points_json = [](const std::vector<FitPoint>& pts, const char* xkey,
                              const char* ykey,
                              const std::function<double(double)>& fitted) {
    json arr = json::array();
    for (const FitPoint& p : pts)
      arr.push_back(
          {{"id", p.id}, {xkey, p.x}, {ykey, p.y}, {"fitted", fitted(p.x)}});
    return arr;
  };

  // Power law: accuracy = A + k * efficiency^alpha.
  {
    std::vector<double> xs, ys;
    for (const FitPoint& p : power_pts) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    json p;
    try {
      PowerFit fit;
      bool note_unconverged = false;
      try {
        fit = powerlaw_fit(xs, ys);
      } catch (const PowerFitError& e) {
        fit = e.best;
        note_unconverged = true;
      }
      p = {{"A", fit.A},          {"k", fit.k},
           {"alpha", fit.alpha},  {"r2", fit.r2},
           {"rss", fit.rss},      {"se_A", fit.se_A},
           {"se_k", fit.se_k},    {"se_alpha", fit.se_alpha},
           {"n", fit.n},          {"converged", fit.converged}};
      if (note_unconverged) p["note"] = "refinement hit the iteration cap";
      p["points"] = points_json(power_pts, "efficiency", "accuracy_percent",
                                [&](double x) { return fit.fitted(x); });
      std::cout << "power law: accuracy = " << fixed4(fit.A) << " + " << fixed4(fit.k)
                << " * eff^" << fixed4(fit.alpha) << "  (R2 " << fixed4(fit.r2)
                << ", n=" << fit.n << ")\n";
    } catch (const StatsError& e) {
      p = {{"note", e.what()}};
      std::cout << "power law: not fitted (" << e.what() << ")\n";
    }
    out["power_law"] = p;
  }

  // Linear laws: reasoning length against score, TCI against score.
  const auto linear_block = [&](const std::vector<FitPoint>& pts, const char* ykey) {
    std::vector<double> xs, ys;
    for (const FitPoint& p : pts) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    json b;
    try {
      const LinearFit fit = ols_fit(xs, ys);
      b = {{"slope", fit.slope},     {"intercept", fit.intercept},
           {"r2", fit.r2},           {"se_slope", fit.se_slope},
           {"p_slope", fit.p_slope}, {"n", fit.n}};
      b["points"] = points_json(pts, "score", ykey,
                                [&](double x) { return fit.fitted(x); });
      std::cout << ykey << " = " << fixed4(fit.slope) << " * score + "
                << fixed4(fit.intercept) << "  (R2 " << fixed4(fit.r2) << ", p "
                << fixed4(fit.p_slope) << ", n=" << fit.n << ")\n";
    } catch (const StatsError& e) {
      b = {{"note", e.what()}};
      std::cout << ykey << " fit: not fitted (" << e.what() << ")\n";
    }
    return b;
  };
  out["score_length"] = linear_block(length_pts, "length");
  out["score_tci"] = linear_block(tci_pts, "tci");

  write_text_file(out_path, out.dump(2) + "\n");
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ===== solve =====

int cmd_solve(const std::string& corpus_dir, const std::string& config_path,
              std::string script_path, const std::string& replay_path,
              const std::string& endpoint_path, const std::string& out_dir,
              std::uint64_t seed) {
  const Corpus corpus = load_corpus(corpus_dir);
  PipelineConfig config =
      config_path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(config_path);

  // Backend precedence: explicit script, then replay, then live endpoint,
  // then the corpus's own script.jsonl.
  bool deterministic = true;
  std::shared_ptr<Backend> backend;
  if (script_path.empty() && replay_path.empty() && endpoint_path.empty()) {
    const fs::path candidate = fs::path(corpus_dir) / "script.jsonl";
    if (fs::exists(candidate)) script_path = candidate.string();
  }
  if (!script_path.empty()) {
    backend = ScriptedBackend::from_file(script_path);
  } else if (!replay_path.empty()) {
    if (endpoint_path.empty())
      throw AgentError("--replay needs --endpoint for request digests");
    backend = std::make_shared<ReplayBackend>(
        EndpointConfig::from_json(json::parse(read_text_file(endpoint_path))),
        replay_path);
  } else if (!endpoint_path.empty()) {
    deterministic = false;
    backend = std::make_shared<HttpBackend>(
        EndpointConfig::from_json(json::parse(read_text_file(endpoint_path))));
  } else {
    throw AgentError("no backend: pass --script, --replay, or --endpoint, or keep a "
                     "script.jsonl beside the corpus");
  }

  Pipeline pipeline(backend, config);
  const RunSummary summary = pipeline.run(corpus);

  RunManifest manifest = make_manifest("solve", seed, deterministic);
  manifest.corpus_digest = corpus_digest(corpus);
  if (!config_path.empty()) manifest.config_digest = file_digest(config_path);

  fs::create_directories(out_dir);
  save_predictions(summary.predictions, (fs::path(out_dir) / "predictions.jsonl").string());
  pipeline.write_trace_log(fs::path(out_dir) / "trace_log.jsonl");

  json outcomes = json::array();
  for (const PuzzleOutcome& o : summary.outcomes) outcomes.push_back(o.to_json());
  json out;
  out["manifest"] = manifest.to_json();
  out["total"] = summary.total;
  out["solved_count"] = summary.solved_count;
  out["solve_rate"] = summary.solve_rate();
  out["outcomes"] = outcomes;
  write_text_file((fs::path(out_dir) / "outcomes.json").string(), out.dump(2) + "\n");

  if (!summary.predictions.empty()) {
    const MetricReport report = build_report(corpus, summary.predictions, manifest);
    report.save((fs::path(out_dir) / "report.json").string());
  }

  int failures = 0;
  for (const PuzzleOutcome& o : summary.outcomes)
    if (o.error) ++failures;
  std::cout << "solved " << summary.solved_count << "/" << summary.total << " ("
            << percent1(summary.solve_rate()) << "%)";
  if (failures) std::cout << ", " << failures << " stage failures";
  std::cout << "\nwrote " << out_dir << "/{predictions.jsonl, outcomes.json, "
            << (summary.predictions.empty() ? "trace_log.jsonl}" :
                                              "report.json, trace_log.jsonl}")
            << "\n";
  return 0;
}

// ===== report =====

int cmd_report(const std::string& report_path, const std::string& scores_path,
               const std::string& out_path, const std::string& radar_path) {
  MetricReport rep = MetricReport::load(report_path);
  if (!scores_path.empty())
    merge_scores(rep, json::parse(read_text_file(scores_path)));
  const std::string text = render_text(rep);
  std::cout << text;
  if (!out_path.empty()) {
    write_text_file(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
  if (!radar_path.empty()) {
    write_text_file(radar_path, radar_export(rep).dump(2) + "\n");
    std::cout << "wrote " << radar_path << "\n";
  }
  return 0;
}

// ===== gen-fixture =====

int cmd_gen_fixture(const std::string& out_dir, int count, std::uint64_t seed) {
  FixtureSpec spec;
  spec.count = count;
  spec.seed = seed;
  const Corpus corpus = generate_fixture_corpus(out_dir, spec);
  std::cout << "wrote " << corpus.puzzles.size() << " puzzles to " << out_dir << "\n";
  for (const auto& [category, n] : corpus.category_counts())
    std::cout << "  " << category << ": " << n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evaluation harness and solving pipeline for visual verification puzzles"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::uint64_t seed = 41;
  std::string replay;
  app.add_option("--seed", seed, "seed recorded in run manifests")->capture_default_str();
  app.add_option("--replay", replay, "replay cassette for model-backed commands");

  // validate
  std::string v_corpus;
  CLI::App* validate = app.add_subcommand("validate", "check a corpus directory");
  validate->add_option("--corpus", v_corpus, "corpus directory")->required();

  // evaluate
  std::string e_corpus, e_predictions, e_out = "report.json";
  bool e_allow_partial = false;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score predictions against a corpus");
  evaluate->add_option("--corpus", e_corpus, "corpus directory")->required();
  evaluate->add_option("--predictions", e_predictions, "predictions JSONL")->required();
  evaluate->add_option("--out", e_out, "metric report output")->capture_default_str();
  evaluate->add_flag("--allow-partial", e_allow_partial,
                     "skip predictions whose puzzle id is unknown");

  // judge
  std::string j_corpus, j_predictions, j_config, j_script, j_out = "scores.json", j_audit;
  CLI::App* judge = app.add_subcommand("judge", "ensemble-score reasoning traces");
  judge->add_option("--corpus", j_corpus, "corpus directory")->required();
  judge->add_option("--predictions", j_predictions, "predictions JSONL")->required();
  judge->add_option("--config", j_config, "judge config (rubric, judges)");
  judge->add_option("--script", j_script, "scripted judge replies JSONL");
  judge->add_option("--out", j_out, "score file output")->capture_default_str();
  judge->add_option("--audit", j_audit, "audit log path (default: beside --out)");

  // stats
  std::string s_report, s_out = "stats.json";
  CLI::App* stats = app.add_subcommand(
      "stats", "paired significance tests and the accuracy-L2 regression");
  stats->add_option("--report", s_report, "metric report file")->required();
  stats->add_option("--out", s_out, "stats output")->capture_default_str();

  // fit
  std::string f_report, f_out = "fit.json";
  bool f_per_category = false;
  CLI::App* fit =
      app.add_subcommand("fit", "scaling-law fits with plot-ready point tables");
  fit->add_option("--report", f_report, "metric report file")->required();
  fit->add_option("--out", f_out, "fit output")->capture_default_str();
  fit->add_flag("--per-category", f_per_category,
                "fit on (model, category) rows instead of per-model aggregates");

  // solve
  std::string so_corpus, so_config, so_script, so_endpoint, so_out = "solve-out";
  CLI::App* solve = app.add_subcommand("solve", "run the agent pipeline over a corpus");
  solve->add_option("--corpus", so_corpus, "corpus directory")->required();
  solve->add_option("--config", so_config, "pipeline config JSON");
  solve->add_option("--script", so_script, "scripted backend replies JSONL");
  solve->add_option("--endpoint", so_endpoint, "endpoint config JSON (live or replay)");
  solve->add_option("--out", so_out, "output directory")->capture_default_str();

  // report
  std::string r_report, r_scores, r_out, r_radar;
  CLI::App* report = app.add_subcommand("report", "render a consolidated summary");
  report->add_option("--report", r_report, "metric report file")->required();
  report->add_option("--scores", r_scores, "judge score file to merge");
  report->add_option("--out", r_out, "write the text summary here too");
  report->add_option("--radar", r_radar, "write per-category radar data JSON");

  // gen-fixture
  std::string g_out;
  int g_count = 50;
  CLI::App* gen = app.add_subcommand("gen-fixture", "write a deterministic test corpus");
  gen->add_option("--out", g_out, "corpus directory to create")->required();
  gen->add_option("--count", g_count, "number of puzzles")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (validate->parsed())
    return run_guarded([&] { return cmd_validate(v_corpus); });
  if (evaluate->parsed())
    return run_guarded(
        [&] { return cmd_evaluate(e_corpus, e_predictions, e_out, e_allow_partial, seed); });
  if (judge->parsed())
    return run_guarded([&] {
      return cmd_judge(j_corpus, j_predictions, j_config, j_script, replay, j_out,
                       j_audit, seed);
    });
  if (stats->parsed())
    return run_guarded([&] { return cmd_stats(s_report, s_out, seed); });
  if (fit->parsed())
    return run_guarded([&] { return cmd_fit(f_report, f_out, f_per_category, seed); });
  if (solve->parsed())
    return run_guarded([&] {
      return cmd_solve(so_corpus, so_config, so_script, replay, so_endpoint, so_out,
                       seed);
    });
  if (report->parsed())
    return run_guarded([&] { return cmd_report(r_report, r_scores, r_out, r_radar); });
  if (gen->parsed())
    return run_guarded([&] { return cmd_gen_fixture(g_out, g_count, seed); });
  return 2;
}
