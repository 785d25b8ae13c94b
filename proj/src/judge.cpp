#include "capbench/judge.hpp"

#include <cmath>
#include <sstream>

#include "capbench/ioutil.hpp"
#include "capbench/sha256.hpp"
#include "capbench/stats.hpp"

namespace capbench {

using nlohmann::json;

// ===== Rubric =====

JudgeRubric JudgeRubric::defaults() {
  JudgeRubric r;
  r.dimensions = {
      {"target_identification", "Does the reasoning identify the correct targets?", 0.25},
      {"logical_coherence", "Do the steps follow from one another without gaps?", 0.25},
      {"spatial_grounding", "Are locations and spatial relations described accurately?", 0.25},
      {"reference_faithfulness", "Does the reasoning agree with the reference trace?", 0.25},
  };
  return r;
}

JudgeRubric JudgeRubric::from_json(const json& j) {
  JudgeRubric r;
  r.scale_max = j.value("scale_max", 5.0);
  for (const json& d : j.at("dimensions")) {
    r.dimensions.push_back({d.at("name").get<std::string>(),
                            d.value("description", std::string()),
                            d.at("weight").get<double>()});
  }
  r.validate();
  return r;
}

json JudgeRubric::to_json() const {
  json dims = json::array();
  for (const RubricDimension& d : dimensions)
    dims.push_back({{"name", d.name}, {"description", d.description}, {"weight", d.weight}});
  return {{"scale_max", scale_max}, {"dimensions", dims}};
}

void JudgeRubric::validate() const {
  if (dimensions.empty()) throw JudgeError("rubric needs at least one dimension");
  if (scale_max <= 0.0) throw JudgeError("rubric scale_max must be positive");
  double sum = 0.0;
  for (const RubricDimension& d : dimensions) {
    if (d.name.empty()) throw JudgeError("rubric dimension with empty name");
    if (d.weight <= 0.0)
      throw JudgeError("rubric weight for '" + d.name + "' must be positive");
    sum += d.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw JudgeError("rubric weights must sum to 1 (got " + std::to_string(sum) + ")");
}

// ===== Panel =====

namespace {

std::string join_trace(const ReasoningTrace& trace) {
  std::ostringstream out;
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << (i + 1) << ". " << trace[i] << "\n";
  return out.str();
}

std::string build_prompt(const JudgeRubric& rubric, const ReasoningTrace& trace,
                         const ReasoningTrace& reference, const std::string& task_context,
                         bool reprompt) {
  std::ostringstream p;
  if (reprompt) {
    p << "Your previous reply was not usable. Answer again, and reply with ONLY a "
         "fenced JSON block as instructed.\n\n";
  }
  p << "Grade the candidate reasoning trace below against the reference trace.\n";
  if (!task_context.empty()) p << "Task: " << task_context << "\n";
  p << "\nCandidate trace:\n"
    << join_trace(trace) << "\nReference trace:\n"
    << join_trace(reference) << "\nScore each dimension from 0 to " << rubric.scale_max
    << " (decimals allowed):\n";
  for (const RubricDimension& d : rubric.dimensions)
    p << "- " << d.name << ": " << d.description << "\n";
  p << "\nReply with exactly one fenced JSON block mapping each dimension name to its "
       "score, e.g.\n```json\n{";
  for (std::size_t i = 0; i < rubric.dimensions.size(); ++i) {
    if (i) p << ", ";
    p << '"' << rubric.dimensions[i].name << "\": 0";
  }
  p << "}\n```\n";
  return p.str();
}

}  // namespace

JudgePanel::JudgePanel(std::vector<PanelJudge> judges, JudgeRubric rubric)
    : judges_(std::move(judges)), rubric_(std::move(rubric)) {
  if (judges_.empty()) throw JudgeError("judge panel needs at least one judge");
  rubric_.validate();
}

void JudgePanel::set_audit_log(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  audit_.open(path, std::ios::app);
  if (!audit_) throw JudgeError("cannot open audit log: " + path.string());
}

void JudgePanel::audit(const json& record) {
  std::lock_guard<std::mutex> lock(audit_mu_);
  if (audit_.is_open()) {
    audit_ << record.dump() << "\n";
    audit_.flush();
  }
}

std::optional<JudgeScore> JudgePanel::ask_judge(const PanelJudge& judge,
                                                const std::string& instance_id,
                                                const std::string& prompt) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    ModelRequest req;
    req.system = "You are a strict grader of step-by-step spatial reasoning.";
    req.user = attempt == 0
                   ? prompt
                   : build_prompt(rubric_, {}, {}, "", true) + "\n\nOriginal request:\n" + prompt;
    req.meta_puzzle_id = instance_id;
    req.meta_stage = "judge:" + judge.id;

    std::string reply;
    try {
      reply = judge.backend->complete(req).response;
    } catch (const ModelClientError& e) {
      audit({{"instance_id", instance_id},
             {"judge_id", judge.id},
             {"attempt", attempt},
             {"prompt_sha256", sha256_hex(req.user)},
             {"error", e.what()},
             {"scores", nullptr}});
      continue;
    }

    std::optional<json> block = extract_fenced_json(reply);
    std::optional<JudgeScore> score;
    if (block) {
      JudgeScore s;
      s.instance_id = instance_id;
      s.judge_id = judge.id;
      bool ok = true;
      double weighted = 0.0;
      for (const RubricDimension& d : rubric_.dimensions) {
        if (!block->contains(d.name) || !(*block)[d.name].is_number()) {
          ok = false;
          break;
        }
        const double v = (*block)[d.name].get<double>();
        if (v < 0.0 || v > rubric_.scale_max) {
          ok = false;
          break;
        }
        s.dimension_scores[d.name] = v;
        weighted += d.weight * v;
      }
      if (ok) {
        s.value = weighted;
        score = s;
      }
    }

    audit({{"instance_id", instance_id},
           {"judge_id", judge.id},
           {"attempt", attempt},
           {"prompt_sha256", sha256_hex(req.user)},
           {"reply", reply},
           {"scores", score ? json(score->dimension_scores) : json(nullptr)}});
    if (score) return score;
  }
  return std::nullopt;
}

AggregateScore JudgePanel::score_reasoning(const std::string& instance_id,
                                           const ReasoningTrace& trace,
                                           const ReasoningTrace& reference,
                                           const std::string& task_context) {
  const std::string prompt = build_prompt(rubric_, trace, reference, task_context, false);

  last_scores_.clear();
  AggregateScore agg;
  agg.instance_id = instance_id;
  agg.panel_size = panel_size();

  double sum = 0.0;
  for (const PanelJudge& judge : judges_) {
    std::optional<JudgeScore> s = ask_judge(judge, instance_id, prompt);
    if (s) {
      last_scores_.push_back(*s);
      sum += s->value;
      ++agg.judge_count;
    } else {
      agg.missing_judges.push_back(judge.id);
    }
  }
  if (agg.judge_count == 0)
    throw JudgeError("no judge produced a usable score for instance " + instance_id);
  agg.value = sum / agg.judge_count;
  return agg;
}

double correlate_with_human(const std::vector<double>& aggregates,
                            const std::vector<double>& human_scores) {
  return pearson(aggregates, human_scores);
}

}  // namespace capbench
