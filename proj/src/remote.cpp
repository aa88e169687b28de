#include "egb/remote.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace egb {

namespace {

struct PostResult {
  nlohmann::json body;
  int retries = 0;
};

/// POST with bounded retries and exponential backoff. Retries connection
/// failures and 5xx statuses; other statuses fail immediately.
PostResult post_json(const RemoteOptions& opt, const std::string& path,
                     const nlohmann::json& request) {
  if (opt.url.empty()) throw ConfigError("remote endpoint URL not set");
  httplib::Client client(opt.url);
  client.set_connection_timeout(0, opt.timeout_ms * 1000);
  client.set_read_timeout(0, opt.timeout_ms * 1000);
  client.set_write_timeout(0, opt.timeout_ms * 1000);

  httplib::Headers headers;
  if (!opt.token.empty()) headers.emplace("Authorization", "Bearer " + opt.token);

  const std::string body = request.dump();
  int attempt = 0;
  while (true) {
    auto res = client.Post(path, headers, body, "application/json");
    const bool is_timeout =
        !res && (res.error() == httplib::Error::ConnectionTimeout ||
                 res.error() == httplib::Error::Read || res.error() == httplib::Error::Write);
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return {nlohmann::json::parse(res->body), attempt};
      } catch (const nlohmann::json::parse_error& e) {
        throw MalformedResponseError(std::string("remote ") + path +
                                         ": invalid JSON body: " + e.what(),
                                     res->body, res->status, attempt);
      }
    }
    const bool retryable = !res || res->status >= 500;
    if (!retryable || attempt >= opt.max_retries) {
      if (res) {
        throw HttpStatusError("remote " + path + ": HTTP " + std::to_string(res->status),
                              res->body, res->status, attempt);
      }
      if (is_timeout) {
        throw TimeoutError("remote " + path + ": timed out after " +
                               std::to_string(opt.timeout_ms) + " ms",
                           "", 0, attempt);
      }
      throw TransportError("remote " + path + ": " + httplib::to_string(res.error()), "", 0,
                           attempt);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(opt.backoff_ms << attempt));
    ++attempt;
  }
}

}  // namespace

RemoteModel::RemoteModel(RemoteModelOptions options) : options_(std::move(options)) {
  if (options_.top_n < 1) throw ParameterError("remote model: top_n must be >= 1");
  if (options_.vocab.empty()) throw ParameterError("remote model: vocab must be non-empty");
}

int RemoteModel::vocab_size() const { return static_cast<int>(options_.vocab.size()) + 1; }

std::string RemoteModel::token_text(TokenId id) const {
  if (id == static_cast<TokenId>(options_.vocab.size())) return "";  // tail bucket
  if (id < 0 || id > static_cast<TokenId>(options_.vocab.size()))
    throw ParameterError("remote model: token id out of range");
  return options_.vocab[static_cast<size_t>(id)];
}

std::vector<TokenId> RemoteModel::tokenize(std::string_view text) const {
  // Greedy longest match over the configured vocabulary.
  std::vector<TokenId> out;
  size_t pos = 0;
  while (pos < text.size()) {
    int best = -1;
    size_t best_len = 0;
    for (size_t id = 0; id < options_.vocab.size(); ++id) {
      const std::string& tok = options_.vocab[id];
      if (tok.empty() || tok.size() < best_len) continue;
      if (text.compare(pos, tok.size(), tok) == 0 && tok.size() > best_len) {
        best = static_cast<int>(id);
        best_len = tok.size();
      }
    }
    if (best < 0)
      throw ParseError("remote model: cannot tokenize text at offset " + std::to_string(pos));
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

TokenDistribution RemoteModel::distribution_from_entries(
    const std::vector<std::pair<TokenId, double>>& id_logprobs) const {
  std::vector<double> probs(static_cast<size_t>(vocab_size()), 0.0);
  double mass = 0.0;
  for (const auto& [id, logprob] : id_logprobs) {
    if (id < 0 || id >= static_cast<TokenId>(options_.vocab.size()))
      throw MalformedResponseError(
          "remote model: token id " + std::to_string(id) + " out of vocab range");
    const double p = std::exp(logprob);
    probs[static_cast<size_t>(id)] += p;
    mass += p;
  }
  if (mass > 1.0 + 1e-6)
    throw MalformedResponseError("remote model: probabilities sum to " +
                                 std::to_string(mass));
  probs.back() = std::max(0.0, 1.0 - mass);  // tail bucket
  TokenDistribution dist{std::move(probs)};
  dist.validate();
  return dist;
}

TokenDistribution RemoteModel::next_distribution(const ModelContext& ctx) const {
  if (options_.max_context_tokens > 0 &&
      static_cast<int>(ctx.token_ids.size()) > options_.max_context_tokens)
    throw ContextOverflowError("context of " + std::to_string(ctx.token_ids.size()) +
                               " tokens exceeds window of " +
                               std::to_string(options_.max_context_tokens));
  nlohmann::json request = {{"context_text", ctx.text}, {"top_n", options_.top_n}};
  PostResult res = post_json(options_.transport, "/v1/next", request);
  last_retries_ = res.retries;
  std::vector<std::pair<TokenId, double>> entries;
  try {
    for (const auto& tok : res.body.at("tokens"))
      entries.emplace_back(tok.at("id").get<TokenId>(), tok.at("logprob").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(std::string("remote model: bad /v1/next body: ") + e.what(),
                                 res.body.dump());
  }
  return distribution_from_entries(entries);
}

StepGeneration RemoteModel::generate_step_remote(const std::string& context_text,
                                                 const std::vector<std::string>& delimiters,
                                                 int max_tokens, double temperature,
                                                 uint64_t seed) const {
  nlohmann::json request = {{"context_text", context_text},
                            {"delimiters", delimiters},
                            {"max_tokens", max_tokens},
                            {"temperature", temperature},
                            {"seed", seed},
                            {"top_n", options_.top_n}};
  PostResult res = post_json(options_.transport, "/v1/generate_step", request);
  last_retries_ = res.retries;
  StepGeneration out;
  try {
    const std::string stop = res.body.at("stop_reason").get<std::string>();
    if (stop == "delimiter") out.stop_reason = StopReason::delimiter;
    else if (stop == "max_tokens") out.stop_reason = StopReason::max_tokens;
    else if (stop == "terminal") out.stop_reason = StopReason::terminal;
    else throw MalformedResponseError("remote model: unknown stop_reason \"" + stop + "\"");
    for (const auto& ev : res.body.at("events")) {
      GenerationEvent e;
      e.token_id = ev.at("token_id").get<TokenId>();
      e.position = ev.at("position").get<int>();
      std::vector<std::pair<TokenId, double>> entries;
      for (const auto& lp : ev.at("top_logprobs"))
        entries.emplace_back(lp.at("id").get<TokenId>(), lp.at("logprob").get<double>());
      e.distribution = distribution_from_entries(entries);
      out.events.push_back(std::move(e));
      out.tokens.push_back(out.events.back().token_id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(
        std::string("remote model: bad /v1/generate_step body: ") + e.what(),
        res.body.dump());
  }
  return out;
}

StepScore RemotePrmVerifier::score(const std::string& context,
                                   const std::vector<std::string>& steps) {
  if (context.empty()) throw ParameterError("verifier: context must be non-empty");
  if (steps.empty()) throw ParameterError("verifier: at least one step required");
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json request = {{"context", context}, {"steps", steps}};
  PostResult res = post_json(options_, "/v1/score", request);

  StepScore out;
  try {
    const auto& scores = res.body.at("step_scores");
    if (scores.empty() || scores.size() > steps.size())
      throw MalformedResponseError("remote PRM: step_scores size " +
                                   std::to_string(scores.size()) + " for " +
                                   std::to_string(steps.size()) + " steps");
    double value = scores.back().get<double>();
    if (res.body.value("scores_are_logits", false)) {
      value = 1.0 / (1.0 + std::exp(-value));  // logistic map to [0,1]
    } else if (value < 0.0 || value > 1.0) {
      throw ValidationError("remote PRM returned score " + std::to_string(value) +
                            " outside [0,1]");
    }
    out.value = value;
    out.scorer_id = res.body.value("scorer_id", "remote");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(std::string("remote PRM: bad /v1/score body: ") + e.what(),
                                 res.body.dump());
  }
  out.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace egb
