#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capbench/corpus.hpp"
#include "capbench/modelclient.hpp"

namespace capbench {

// ===== Errors =====

class JudgeError : public std::runtime_error {
 public:
  explicit JudgeError(const std::string& what) : std::runtime_error(what) {}
};

// ===== Rubric =====

struct RubricDimension {
  std::string name;
  std::string description;
  double weight;
};

struct JudgeRubric {
  std::vector<RubricDimension> dimensions;
  double scale_max = 5.0;

  // Four equally weighted dimensions covering target identification, step
  // coherence, spatial grounding, and faithfulness to the reference trace.
  static JudgeRubric defaults();
  static JudgeRubric from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws JudgeError unless there is at least one dimension, every weight is
  // positive, and the weights sum to 1.
  void validate() const;
};

// ===== Scores =====

struct JudgeScore {
  std::string instance_id;
  std::string judge_id;
  std::map<std::string, double> dimension_scores;
  double value = 0.0;  // rubric-weighted combination, in [0, scale_max]
};

struct AggregateScore {
  std::string instance_id;
  double value = 0.0;  // arithmetic mean over the judges that answered
  int judge_count = 0;
  int panel_size = 0;
  std::vector<std::string> missing_judges;

  bool complete() const { return judge_count == panel_size; }
};

// ===== Panel =====

struct PanelJudge {
  std::string id;
  std::shared_ptr<Backend> backend;
};

// Ensemble of judge backends scoring a reasoning trace against a reference.
// Each judge must answer with a fenced JSON block keyed by dimension name; a
// non-conforming reply gets exactly one re-prompt and is then recorded as
// missing rather than guessed.
class JudgePanel {
 public:
  JudgePanel(std::vector<PanelJudge> judges, JudgeRubric rubric);

  // Every judge call is appended as one JSON line: instance, judge, attempt,
  // prompt hash, raw reply, extracted scores (null when rejected).
  void set_audit_log(const std::filesystem::path& path);

  AggregateScore score_reasoning(const std::string& instance_id,
                                 const ReasoningTrace& trace,
                                 const ReasoningTrace& reference,
                                 const std::string& task_context = "");

  // Per-judge detail for the most recent score_reasoning call.
  const std::vector<JudgeScore>& last_scores() const { return last_scores_; }

  const JudgeRubric& rubric() const { return rubric_; }
  int panel_size() const { return static_cast<int>(judges_.size()); }

 private:
  std::optional<JudgeScore> ask_judge(const PanelJudge& judge,
                                      const std::string& instance_id,
                                      const std::string& prompt);
  void audit(const nlohmann::json& record);

  std::vector<PanelJudge> judges_;
  JudgeRubric rubric_;
  std::vector<JudgeScore> last_scores_;
  std::mutex audit_mu_;
  std::ofstream audit_;
};

// Pearson correlation between aggregated panel scores and human scores.
// Delegates to the shared statistics routine; listed here because it closes
// the judge-calibration loop.
double correlate_with_human(const std::vector<double>& aggregates,
                            const std::vector<double>& human_scores);

}  // namespace capbench
