#include "egb/scripted_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace egb {

ScriptedModel::ScriptedModel(std::vector<std::string> vocab) {
  for (auto& t : vocab) add_token(t);
}

TokenId ScriptedModel::add_token(const std::string& text) {
  if (text.empty()) throw ParameterError("scripted model token text must be non-empty");
  auto it = token_by_text_.find(text);
  if (it != token_by_text_.end()) return it->second;
  const TokenId id = static_cast<TokenId>(vocab_.size());
  vocab_.push_back(text);
  token_by_text_.emplace(text, id);
  return id;
}

TokenId ScriptedModel::token_id(const std::string& text) const {
  auto it = token_by_text_.find(text);
  if (it == token_by_text_.end())
    throw ParameterError("scripted model has no token \"" + text + "\"");
  return it->second;
}

void ScriptedModel::set_row(const std::string& context_text,
                            const std::vector<std::pair<TokenId, double>>& entries) {
  row_to_distribution(entries);  // validates now, not at query time
  rows_[context_text] = entries;
}

void ScriptedModel::set_row_text(const std::string& context_text,
                                 const std::vector<std::pair<std::string, double>>& entries) {
  std::vector<std::pair<TokenId, double>> ids;
  ids.reserve(entries.size());
  for (const auto& [text, p] : entries) ids.emplace_back(token_id(text), p);
  set_row(context_text, ids);
}

void ScriptedModel::set_default_row(const std::vector<std::pair<TokenId, double>>& entries) {
  row_to_distribution(entries);
  default_row_ = entries;
  has_default_ = true;
}

bool ScriptedModel::has_row(const std::string& context_text) const {
  return rows_.count(context_text) > 0;
}

std::string ScriptedModel::token_text(TokenId id) const {
  if (id < 0 || id >= vocab_size())
    throw ParameterError("token id " + std::to_string(id) + " out of range");
  return vocab_[static_cast<size_t>(id)];
}

std::vector<TokenId> ScriptedModel::tokenize(std::string_view text) const {
  // Greedy longest match over the vocabulary.
  std::vector<TokenId> out;
  size_t pos = 0;
  while (pos < text.size()) {
    TokenId best = -1;
    size_t best_len = 0;
    for (TokenId id = 0; id < vocab_size(); ++id) {
      const std::string& tok = vocab_[static_cast<size_t>(id)];
      if (tok.size() > best_len && text.compare(pos, tok.size(), tok) == 0) {
        best = id;
        best_len = tok.size();
      }
    }
    if (best < 0)
      throw ParseError("scripted model cannot tokenize text at offset " + std::to_string(pos) +
                       ": \"" + std::string(text.substr(pos, 16)) + "\"");
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

TokenDistribution ScriptedModel::row_to_distribution(
    const std::vector<std::pair<TokenId, double>>& entries) const {
  std::vector<double> probs(static_cast<size_t>(vocab_size()), 0.0);
  for (const auto& [id, p] : entries) {
    if (id < 0 || id >= vocab_size())
      throw ParameterError("scripted row references token id " + std::to_string(id));
    probs[static_cast<size_t>(id)] += p;
  }
  return TokenDistribution::make(std::move(probs));
}

TokenDistribution ScriptedModel::next_distribution(const ModelContext& ctx) const {
  auto it = rows_.find(ctx.text);
  if (it != rows_.end()) return row_to_distribution(it->second);
  if (has_default_) return row_to_distribution(default_row_);
  throw Error("scripted model has no entry for context \"" + ctx.text + "\"");
}

ScriptedModel ScriptedModel::from_json_text(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scripted model JSON: ") + e.what());
  }
  if (!j.contains("vocab") || !j["vocab"].is_array())
    throw ParseError("scripted model JSON needs a \"vocab\" array");
  ScriptedModel m;
  for (const auto& t : j["vocab"]) m.add_token(t.get<std::string>());
  if (j.contains("rows")) {
    for (auto& [ctx, row] : j["rows"].items()) {
      std::vector<std::pair<std::string, double>> entries;
      for (auto& [tok, p] : row.items()) entries.emplace_back(tok, p.get<double>());
      m.set_row_text(ctx, entries);
    }
  }
  if (j.contains("default")) {
    std::vector<std::pair<TokenId, double>> entries;
    for (auto& [tok, p] : j["default"].items())
      entries.emplace_back(m.token_id(tok), p.get<double>());
    m.set_default_row(entries);
  }
  return m;
}

ScriptedModel ScriptedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scripted model file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string ScriptedModel::to_json_text() const {
  nlohmann::json j;
  j["vocab"] = vocab_;
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [ctx, row] : rows_) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [id, p] : row) r[token_text(id)] = p;
    rows[ctx] = r;
  }
  j["rows"] = rows;
  if (has_default_) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [id, p] : default_row_) r[token_text(id)] = p;
    j["default"] = r;
  }
  return j.dump(2);
}

}  // namespace egb
