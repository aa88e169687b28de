#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "egb/ngram_model.hpp"
#include "egb/scripted_model.hpp"
#include "egb/search.hpp"

namespace egb {

struct Problem {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  std::vector<std::string> tags;
};

/// Per-problem outcome inside a RunReport.
struct ProblemResult {
  std::string id;
  std::string predicted;
  bool correct = false;
  long candidates_generated = 0;
  long model_calls = 0;
  long verifier_calls = 0;
  double wall_time_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct RunReport {
  std::string method;  // endpoint-labeled: tau=0 -> beam_search, tau=inf -> self_consistency
  SearchConfig config;
  std::vector<ProblemResult> per_problem;  // ordered by problem id
  double accuracy = 0.0;
  double mean_candidates = 0.0;
  double mean_wall_time = 0.0;
  long total_budget = 0;  // samples for self-consistency, K*W for beam-style
  int failures = 0;
  std::string sweep_axis;   // set by sweep()
  double sweep_value = 0.0; // set by sweep()
  std::string tuning_split; // dataset split tau was tuned on, when applicable
};

nlohmann::json config_to_json(const SearchConfig& cfg);
SearchConfig config_from_json(const nlohmann::json& j, SearchConfig base = {});
nlohmann::json report_to_json(const RunReport& report);

/// JSONL, one {id, prompt, gold_answer, tags?} object per line. Rejects
/// duplicate ids and missing/empty required fields; parse errors carry the
/// 1-based line number.
std::vector<Problem> load_dataset(const std::string& path);

/// Normalization used by grade(): trim, case-fold, collapse internal
/// whitespace, strip trailing punctuation, canonicalize numeric strings.
std::string normalize_answer(const std::string& s);

/// Normalized exact match.
bool grade(const std::string& predicted, const std::string& gold);

/// Final answer of a solution: the text after the last "answer:", with
/// terminal markers stripped and whitespace trimmed. Falls back to the whole
/// trimmed solution when no marker is present.
std::string extract_answer(const std::string& solution_text,
                           const std::vector<std::string>& terminal_markers = {"<eos>"});

/// Figure-of-merit budget for a config: sample count for self-consistency,
/// K*W for beam-style methods, 1 for standard decoding.
long budget_for(const SearchConfig& cfg);

/// Runs every problem through run_search (with majority voting for
/// self-consistency). Per-problem seeds derive from cfg.seed and the problem
/// id, so results do not depend on `workers`. Per-problem failures are
/// recorded and the run continues.
RunReport run_benchmark(const std::vector<Problem>& dataset, const SearchConfig& cfg,
                        const SequenceModel& model, Verifier& verifier, int workers = 1);

enum class SweepAxis { tau, K, W, budget };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis axis);

/// One independent benchmark per axis value, each with a seed derived from
/// the base seed and the value, so curves are reproducible point-wise.
std::vector<RunReport> sweep(const std::vector<Problem>& dataset, const SearchConfig& base,
                             SweepAxis axis, const std::vector<double>& values,
                             const SequenceModel& model, Verifier& verifier,
                             int workers = 1);

enum class SpikeProfile { none, all_forks, mixed };
SpikeProfile spike_profile_from_string(const std::string& s);

struct SuiteSpec {
  int n_problems = 1;
  int fork_depth = 3;
  SpikeProfile spike_profile = SpikeProfile::all_forks;
  uint64_t seed = 0;
  double fork_low_prob = 0.05;  // minority mass at non-fork (near-certain) rows
};

struct SyntheticSuite {
  std::vector<Problem> problems;
  std::shared_ptr<ScriptedModel> model;
  std::shared_ptr<OracleVerifier> verifier;
  StepBoundaryRule step_rule;
  std::vector<std::string> correct_paths;  // e.g. "LRL", aligned with problems
};

/// Builds scripted multi-step problems: low-entropy tokens everywhere except
/// designated fork positions, where the distribution splits between a correct
/// and an incorrect continuation. Gold answers follow the correct forks.
SyntheticSuite build_synthetic_suite(const SuiteSpec& spec);

}  // namespace egb
