#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egb/prob.hpp"

namespace egb {

/// Abstraction over anything that can predict the next token: built-in
/// scripted and n-gram models, or a remote inference server.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual int vocab_size() const = 0;
  virtual std::string token_text(TokenId id) const = 0;

  /// Greedy longest-match tokenization over the model's vocabulary.
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;

  /// Full next-token distribution given the context. Deterministic in ctx.
  virtual TokenDistribution next_distribution(const struct ModelContext& ctx) const = 0;

  /// Models that are not safe for concurrent calls return false and the
  /// engine serializes access.
  virtual bool concurrent_safe() const { return true; }

  /// True when distributions are truncated top-n lists with a synthetic tail
  /// bucket, making computed entropies lower bounds.
  virtual bool entropy_lower_bound() const { return false; }

  std::string detokenize(std::span<const TokenId> ids) const;
};

/// Token ids plus the detokenized text, kept in sync.
struct ModelContext {
  std::vector<TokenId> token_ids;
  std::string text;

  static ModelContext from_text(const SequenceModel& model, std::string_view text);

  void append(const SequenceModel& model, std::span<const TokenId> ids);
  void append_token(const SequenceModel& model, TokenId id);

  /// Rollback support: keep only the first `n_tokens` tokens.
  void truncate(const SequenceModel& model, size_t n_tokens);
};

/// Where a reasoning step ends.
struct StepBoundaryRule {
  std::vector<std::string> delimiters = {".\n", "\n\n"};
  int max_step_tokens = 256;
  std::vector<std::string> terminal_markers = {"<eos>"};

  void validate() const;

  /// True if `text` ends with one of the markers.
  static bool ends_with_any(std::string_view text, const std::vector<std::string>& markers);
};

enum class StopReason { delimiter, max_tokens, terminal };

std::string to_string(StopReason r);

/// Per-position record: the sampled token together with the model's
/// temperature-1 distribution at that position.
struct GenerationEvent {
  TokenId token_id = 0;
  TokenDistribution distribution;
  int position = 0;  // offset within the step
};

struct SamplerSettings {
  double temperature = 1.0;
  bool greedy = false;  // argmax instead of sampling
};

struct StepGeneration {
  std::vector<TokenId> tokens;
  std::vector<GenerationEvent> events;
  StopReason stop_reason = StopReason::delimiter;
};

/// Generates one step from `ctx` (which is not mutated). Tokens are emitted
/// until the step text ends with a delimiter, a terminal marker is reached, or
/// max_step_tokens is hit. `preamble` is a step fragment that was already
/// emitted (used by branch continuations): stop conditions and the token cap
/// apply to preamble + new tokens, and event positions start after it.
StepGeneration generate_step(const SequenceModel& model, const ModelContext& ctx,
                             const StepBoundaryRule& rule, const SamplerSettings& sampler,
                             std::mt19937_64& rng,
                             std::span<const TokenId> preamble = {});

/// Entropy-gated variant: before emitting each token the temperature-1
/// entropy is checked against `tau`; at the first exceedance generation stops
/// with the already-emitted prefix and the triggering distribution.
struct GatedStepGeneration {
  std::vector<TokenId> tokens;  // prefix [0, t*) when gated, full step otherwise
  std::vector<GenerationEvent> events;
  StopReason stop_reason = StopReason::delimiter;
  std::optional<int> exceeded_at;            // t*, position of the gate hit
  std::optional<TokenDistribution> trigger;  // distribution at t*
};

GatedStepGeneration generate_step_gated(const SequenceModel& model, const ModelContext& ctx,
                                        const StepBoundaryRule& rule,
                                        const SamplerSettings& sampler, std::mt19937_64& rng,
                                        double tau);

}  // namespace egb
