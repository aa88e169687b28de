#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "egb/lm.hpp"

namespace egb {

/// Table-driven model: maps a context text to the next-token distribution,
/// verbatim. The workhorse behind unit tests, the synthetic benchmark suite
/// and the bundled CLI demo.
class ScriptedModel : public SequenceModel {
 public:
  ScriptedModel() = default;
  explicit ScriptedModel(std::vector<std::string> vocab);

  /// Adds a token (or returns the existing id for the same text).
  TokenId add_token(const std::string& text);
  TokenId token_id(const std::string& text) const;  // throws if unknown

  /// Defines the distribution for one context. Sparse entries; the rest of
  /// the vocabulary gets probability 0. Probabilities must sum to 1.
  void set_row(const std::string& context_text,
               const std::vector<std::pair<TokenId, double>>& entries);
  void set_row_text(const std::string& context_text,
                    const std::vector<std::pair<std::string, double>>& entries);

  /// Fallback for contexts without an explicit row. Without it, an unknown
  /// context is an error.
  void set_default_row(const std::vector<std::pair<TokenId, double>>& entries);

  bool has_row(const std::string& context_text) const;

  // SequenceModel
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  std::string token_text(TokenId id) const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  TokenDistribution next_distribution(const ModelContext& ctx) const override;

  const std::vector<std::string>& vocab() const { return vocab_; }

  // JSON persistence, used by the CLI's scripted:<path> model spec.
  static ScriptedModel load(const std::string& path);
  static ScriptedModel from_json_text(const std::string& json_text);
  std::string to_json_text() const;

 private:
  TokenDistribution row_to_distribution(
      const std::vector<std::pair<TokenId, double>>& entries) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> token_by_text_;
  std::map<std::string, std::vector<std::pair<TokenId, double>>> rows_;
  std::vector<std::pair<TokenId, double>> default_row_;
  bool has_default_ = false;
};

}  // namespace egb
