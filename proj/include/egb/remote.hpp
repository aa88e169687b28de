#pragma once

#include <string>
#include <vector>

#include "egb/lm.hpp"
#include "egb/verify.hpp"

namespace egb {

struct RemoteModelOptions {
  RemoteOptions transport;
  int top_n = 20;            // logprob entries requested per call
  int max_context_tokens = 0;  // 0 = no client-side window check
  std::vector<std::string> vocab;  // token texts; ids are indices
};

/// SequenceModel adapter for the remote wire protocol. The server returns
/// top-n logprobs; residual mass is folded into a synthetic tail bucket (the
/// last distribution slot), which makes computed entropies lower bounds.
class RemoteModel : public SequenceModel {
 public:
  explicit RemoteModel(RemoteModelOptions options);

  int vocab_size() const override;  // includes the tail bucket slot
  std::string token_text(TokenId id) const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  TokenDistribution next_distribution(const ModelContext& ctx) const override;
  bool entropy_lower_bound() const override { return true; }

  /// Server-side step generation (POST /v1/generate_step). The engine's own
  /// loop uses next_distribution; this entry point lets callers delegate a
  /// whole step to the server.
  StepGeneration generate_step_remote(const std::string& context_text,
                                      const std::vector<std::string>& delimiters,
                                      int max_tokens, double temperature,
                                      uint64_t seed) const;

  /// Retries consumed by the most recent successful call.
  int last_retries() const { return last_retries_; }

 private:
  TokenDistribution distribution_from_entries(
      const std::vector<std::pair<TokenId, double>>& id_logprobs) const;

  RemoteModelOptions options_;
  mutable int last_retries_ = 0;
};

}  // namespace egb
