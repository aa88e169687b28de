#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "egb/lm.hpp"

namespace egb {

/// Add-k smoothed n-gram model with backoff to lower orders. Whitespace
/// tokenization over an explicit small vocabulary; token text carries a
/// trailing space so detokenization is plain concatenation.
class NgramModel : public SequenceModel {
 public:
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  std::string token_text(TokenId id) const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  TokenDistribution next_distribution(const ModelContext& ctx) const override;

  int order() const { return order_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  friend NgramModel build_ngram_model(const std::string&, int, double,
                                      const std::vector<std::string>&);

  std::vector<std::string> vocab_;  // bare symbols, without the trailing space
  std::unordered_map<std::string, TokenId> id_by_symbol_;
  int order_ = 1;
  double add_k_ = 0.0;
  // counts_[m-1]: m-gram counts keyed by the id sequence
  std::vector<std::map<std::vector<TokenId>, long>> counts_;
  std::vector<std::map<std::vector<TokenId>, long>> context_totals_;  // per order
};

/// Trains the model on a whitespace-separated corpus. `extra_vocab` admits
/// symbols that never occur in the corpus (they get smoothed mass only).
NgramModel build_ngram_model(const std::string& corpus, int order, double add_k,
                             const std::vector<std::string>& extra_vocab = {});

/// Loads {"corpus": "...", "order": n, "add_k": x, "extra_vocab": [...]} JSON.
NgramModel load_ngram_model(const std::string& path);

}  // namespace egb
