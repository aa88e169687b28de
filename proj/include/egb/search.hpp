#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "egb/lm.hpp"
#include "egb/seeding.hpp"
#include "egb/verify.hpp"

namespace egb {

constexpr double kTauInfinity = std::numeric_limits<double>::infinity();

enum class Method { standard, beam_search, egb, self_consistency };
Method method_from_string(const std::string& s);
std::string to_string(Method m);

/// Whether a beam's uncertainty is decided by any token of the step or by
/// the step's first token only.
enum class GateMode { any_token, first_token };

/// How certain beams decode: default sampling at base temperature, or argmax.
enum class CertainDecode { sample, greedy };

struct SearchConfig {
  double tau = 1.5;  // bits; kTauInfinity disables branching
  int beam_size = 4;        // K
  int beam_width = 4;       // W
  int max_steps = 16;       // T
  double base_temperature = 0.7;
  double branch_temperature = 1.0;
  StepBoundaryRule step_rule;
  uint64_t seed = 0;
  Method method = Method::egb;
  AggregationRule aggregation = AggregationRule::last;
  bool rescore_history = false;
  GateMode gate_mode = GateMode::any_token;
  CertainDecode certain_decode = CertainDecode::sample;
  bool record_timing = true;  // off: wall times report as 0 so artifacts are byte-stable

  /// Throws ConfigError on invalid or method-inconsistent settings
  /// (beam_search requires tau = 0, self_consistency tau = inf, standard
  /// additionally K = W = 1).
  void validate() const;
};

/// Copy of `base` with the fields the method constrains forced to their
/// required values.
SearchConfig config_for_method(Method m, SearchConfig base);

/// Recorded rollback-and-branch occurrence.
struct BranchEvent {
  int step_index = 0;  // 1-based
  int t_star = 0;      // token position within the step
  double trigger_entropy_bits = 0.0;
};

enum class SamplerState { certain, uncertain, branch_point };
std::string to_string(SamplerState s);

/// Per-token record a beam accumulates for tracing.
struct TokenTrace {
  int step_index = 0;
  TokenId token_id = 0;
  std::string token_text;
  double entropy_bits = 0.0;
  double varentropy_bits2 = 0.0;
  bool branched = false;
  SamplerState state = SamplerState::certain;
  bool entropy_lower_bound = false;
};

/// One active hypothesis.
struct Beam {
  int id = 0;          // slot in the active list
  uint64_t seed = 0;   // root of this trajectory's randomness
  ModelContext ctx;
  std::string prompt_text;
  std::vector<std::pair<std::string, StepScore>> steps;
  std::vector<TokenTrace> trace;
  std::vector<BranchEvent> branch_events;
  bool finished = false;

  /// Step texts concatenated; equals ctx.text minus the prompt.
  std::string solution_text() const;
  double aggregate(AggregationRule rule) const;
};

/// One proposed continuation in the per-step pool.
struct PoolEntry {
  int source_beam_index = 0;
  int branch_index = 0;
  std::vector<TokenId> step_tokens;
  std::vector<GenerationEvent> events;
  StopReason stop_reason = StopReason::delimiter;
  std::string step_text;
  uint64_t beam_seed = 0;  // seed the surviving candidate inherits
  std::optional<int> t_star;
  double trigger_entropy_bits = 0.0;
  bool from_uncertain_beam = false;
  bool passthrough_finished = false;

  // Carried along so ranking is self-contained.
  std::string context_text;
  std::vector<std::string> prior_steps;
  std::vector<StepScore> prior_scores;
  std::vector<TokenId> full_tokens;  // source ctx + continuation, the dedup key
};

struct CandidatePool {
  std::vector<PoolEntry> entries;
  std::vector<PoolEntry> removed;  // dedup victims, kept for slot restoration
  int dedup_removed = 0;
  // Pre-dedup composition.
  int certain_entries = 0;
  int uncertain_beams = 0;
  int finished_entries = 0;
};

struct ScoredCandidate {
  size_t pool_index = 0;
  std::vector<StepScore> step_scores;
  double aggregate = 0.0;
};

struct StepStats {
  int step_index = 0;
  int pool_pre_dedup = 0;
  int certain_entries = 0;
  int uncertain_beams = 0;
  int finished_entries = 0;
  int dedup_removed = 0;
};

struct SearchResult {
  std::vector<Beam> all_beams;
  int best_index = 0;
  long total_candidates_generated = 0;
  long total_model_calls = 0;
  long total_verifier_calls = 0;
  double wall_time_ms = 0.0;
  std::vector<int> per_step_pool_sizes;  // pre-dedup
  std::vector<StepStats> step_stats;
  SearchConfig config;

  const Beam& best_beam() const { return all_beams.at(static_cast<size_t>(best_index)); }
};

/// Smallest event position whose temperature-1 entropy exceeds tau.
std::optional<int> detect_first_exceedance(const std::vector<GenerationEvent>& events,
                                           double tau);

/// Truncates a partially generated step at t_star and produces W candidate
/// continuations. Branch j takes the j-th most probable token of the
/// triggering distribution when the support allows, otherwise samples it at
/// branch temperature; the remainder of each continuation is sampled at
/// branch temperature. All W candidates share the prefix [0, t_star).
std::vector<PoolEntry> rollback_and_branch(const Beam& beam,
                                           const std::vector<TokenId>& prefix_tokens,
                                           const std::vector<GenerationEvent>& prefix_events,
                                           const TokenDistribution& trigger, int t_star,
                                           int step_index, const SearchConfig& cfg,
                                           const SequenceModel& model);

/// Expands all beams by one step under entropy gating: certain beams
/// contribute a single continuation, uncertain beams W branches, finished
/// beams pass through as-is. `step_index` is 1-based; step 1 applies the
/// root-initialization rule (K diverse samples when the root is certain).
CandidatePool expand_step(const std::vector<Beam>& beams, int step_index,
                          const SearchConfig& cfg, const SequenceModel& model);

/// Removes candidates whose full token sequence (source context +
/// continuation) duplicates an earlier entry; first occurrence by
/// (beam index, branch index) survives. Removed entries are retained for
/// slot restoration during selection.
void dedup(CandidatePool& pool);

/// Scores every pool entry and returns them in descending aggregate order,
/// ties broken by (source beam index, branch index). Finished passthroughs
/// keep their frozen aggregate and are not re-scored.
std::vector<ScoredCandidate> rank_candidates(const CandidatePool& pool, Verifier& verifier,
                                             AggregationRule rule,
                                             bool rescore_history = false);

/// Runs the configured method end to end. For method = beam_search this
/// dispatches to run_beam_search.
SearchResult run_search(const std::string& problem, const SearchConfig& cfg,
                        const SequenceModel& model, Verifier& verifier);

/// Dedicated step-wise beam-search path: every beam with a stochastic
/// position is expanded W ways each step; no entropy threshold is consulted.
SearchResult run_beam_search(const std::string& problem, const SearchConfig& cfg,
                             const SequenceModel& model, Verifier& verifier);

/// Majority vote over final answers. Ties prefer the answer with the higher
/// mean verifier aggregate, then the lexicographically smaller answer.
std::string self_consistency_vote(const std::vector<std::string>& answers);
std::string self_consistency_vote(
    const std::vector<std::pair<std::string, double>>& answers_with_scores);

}  // namespace egb
