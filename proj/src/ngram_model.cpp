#include "egb/ngram_model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace egb {

namespace {

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

std::string NgramModel::token_text(TokenId id) const {
  if (id < 0 || id >= vocab_size())
    throw ParameterError("token id " + std::to_string(id) + " out of range");
  return vocab_[static_cast<size_t>(id)] + " ";
}

std::vector<TokenId> NgramModel::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& sym : split_ws(text)) {
    auto it = id_by_symbol_.find(sym);
    if (it == id_by_symbol_.end())
      throw ParseError("n-gram model: unknown symbol \"" + sym + "\"");
    out.push_back(it->second);
  }
  return out;
}

TokenDistribution NgramModel::next_distribution(const ModelContext& ctx) const {
  const int v = vocab_size();
  const auto& ids = ctx.token_ids;
  // Longest usable context first; a context is usable when it was observed
  // in training. Order 1 (empty context) always applies.
  int max_ctx = std::min<int>(order_ - 1, static_cast<int>(ids.size()));
  for (int len = max_ctx; len >= 0; --len) {
    std::vector<TokenId> context(ids.end() - len, ids.end());
    const auto& totals = context_totals_[static_cast<size_t>(len)];
    auto tot_it = totals.find(context);
    const long total = tot_it == totals.end() ? 0 : tot_it->second;
    if (total == 0 && len > 0) continue;  // back off
    if (total == 0 && add_k_ <= 0.0)
      throw Error("n-gram model has no counts and no smoothing");

    const auto& grams = counts_[static_cast<size_t>(len)];
    std::vector<double> probs(static_cast<size_t>(v), 0.0);
    const double denom = static_cast<double>(total) + add_k_ * v;
    for (TokenId w = 0; w < v; ++w) {
      std::vector<TokenId> gram = context;
      gram.push_back(w);
      auto it = grams.find(gram);
      const double c = it == grams.end() ? 0.0 : static_cast<double>(it->second);
      probs[static_cast<size_t>(w)] = (c + add_k_) / denom;
    }
    return TokenDistribution::make(std::move(probs));
  }
  throw Error("n-gram backoff exhausted");  // unreachable for trained models
}

NgramModel build_ngram_model(const std::string& corpus, int order, double add_k,
                             const std::vector<std::string>& extra_vocab) {
  if (order < 1) throw ParameterError("n-gram order must be >= 1");
  if (add_k < 0.0) throw ParameterError("add-k constant must be >= 0");
  const auto symbols = split_ws(corpus);
  if (symbols.empty()) throw ParameterError("n-gram corpus must be non-empty");

  NgramModel m;
  m.order_ = order;
  m.add_k_ = add_k;
  auto intern = [&m](const std::string& sym) {
    auto it = m.id_by_symbol_.find(sym);
    if (it != m.id_by_symbol_.end()) return it->second;
    const TokenId id = static_cast<TokenId>(m.vocab_.size());
    m.vocab_.push_back(sym);
    m.id_by_symbol_.emplace(sym, id);
    return id;
  };
  std::vector<TokenId> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(intern(s));
  for (const auto& s : extra_vocab) intern(s);

  m.counts_.resize(static_cast<size_t>(order));
  m.context_totals_.resize(static_cast<size_t>(order));
  for (int len = 0; len < order; ++len) {  // len = context length, gram = len + 1
    auto& grams = m.counts_[static_cast<size_t>(len)];
    auto& totals = m.context_totals_[static_cast<size_t>(len)];
    for (size_t i = static_cast<size_t>(len); i < ids.size(); ++i) {
      std::vector<TokenId> gram(ids.begin() + static_cast<long>(i) - len,
                                ids.begin() + static_cast<long>(i) + 1);
      std::vector<TokenId> context(gram.begin(), gram.end() - 1);
      grams[gram]++;
      totals[context]++;
    }
  }
  return m;
}

NgramModel load_ngram_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open n-gram model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("n-gram model JSON: ") + e.what());
  }
  if (!j.contains("corpus")) throw ParseError("n-gram model JSON needs \"corpus\"");
  std::vector<std::string> extra;
  if (j.contains("extra_vocab")) extra = j["extra_vocab"].get<std::vector<std::string>>();
  return build_ngram_model(j["corpus"].get<std::string>(), j.value("order", 2),
                           j.value("add_k", 0.0), extra);
}

}  // namespace egb
