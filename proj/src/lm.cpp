#include "egb/lm.hpp"

namespace egb {

std::string SequenceModel::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += token_text(id);
  return out;
}

ModelContext ModelContext::from_text(const SequenceModel& model, std::string_view text) {
  ModelContext ctx;
  ctx.token_ids = model.tokenize(text);
  ctx.text = model.detokenize(ctx.token_ids);
  return ctx;
}

void ModelContext::append(const SequenceModel& model, std::span<const TokenId> ids) {
  for (TokenId id : ids) append_token(model, id);
}

void ModelContext::append_token(const SequenceModel& model, TokenId id) {
  token_ids.push_back(id);
  text += model.token_text(id);
}

void ModelContext::truncate(const SequenceModel& model, size_t n_tokens) {
  if (n_tokens >= token_ids.size()) return;
  token_ids.resize(n_tokens);
  text.clear();
  for (TokenId id : token_ids) text += model.token_text(id);
}

void StepBoundaryRule::validate() const {
  if (delimiters.empty()) throw ParameterError("step rule needs at least one delimiter");
  if (max_step_tokens < 1) throw ParameterError("max_step_tokens must be >= 1");
}

bool StepBoundaryRule::ends_with_any(std::string_view text,
                                     const std::vector<std::string>& markers) {
  for (const auto& m : markers) {
    if (!m.empty() && text.size() >= m.size() &&
        text.compare(text.size() - m.size(), m.size(), m) == 0)
      return true;
  }
  return false;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::delimiter: return "delimiter";
    case StopReason::max_tokens: return "max_tokens";
    case StopReason::terminal: return "terminal";
  }
  return "?";
}

namespace {

TokenId pick_token(const TokenDistribution& dist, const SamplerSettings& sampler,
                   std::mt19937_64& rng) {
  if (sampler.greedy) return prob::argmax(dist);
  if (sampler.temperature == 1.0) return prob::sample(dist, rng);
  return prob::sample(prob::apply_temperature(dist, sampler.temperature), rng);
}

}  // namespace

StepGeneration generate_step(const SequenceModel& model, const ModelContext& ctx,
                             const StepBoundaryRule& rule, const SamplerSettings& sampler,
                             std::mt19937_64& rng, std::span<const TokenId> preamble) {
  rule.validate();
  StepGeneration out;
  if (preamble.empty() && StepBoundaryRule::ends_with_any(ctx.text, rule.terminal_markers)) {
    out.stop_reason = StopReason::terminal;
    return out;
  }

  ModelContext scratch = ctx;
  std::string step_text;
  for (TokenId id : preamble) {
    scratch.append_token(model, id);
    step_text += model.token_text(id);
  }
  // The preamble may already complete the step (e.g. a branch token that
  // closes a delimiter).
  if (!preamble.empty()) {
    if (StepBoundaryRule::ends_with_any(scratch.text, rule.terminal_markers)) {
      out.stop_reason = StopReason::terminal;
      return out;
    }
    if (StepBoundaryRule::ends_with_any(step_text, rule.delimiters)) {
      out.stop_reason = StopReason::delimiter;
      return out;
    }
  }

  int step_tokens = static_cast<int>(preamble.size());
  out.stop_reason = StopReason::max_tokens;
  while (step_tokens < rule.max_step_tokens) {
    TokenDistribution dist = model.next_distribution(scratch);
    const TokenId id = pick_token(dist, sampler, rng);
    out.events.push_back({id, dist, step_tokens});
    out.tokens.push_back(id);
    scratch.append_token(model, id);
    step_text += model.token_text(id);
    ++step_tokens;

    if (StepBoundaryRule::ends_with_any(step_text, rule.terminal_markers) ||
        StepBoundaryRule::ends_with_any(scratch.text, rule.terminal_markers)) {
      out.stop_reason = StopReason::terminal;
      break;
    }
    if (StepBoundaryRule::ends_with_any(step_text, rule.delimiters)) {
      out.stop_reason = StopReason::delimiter;
      break;
    }
  }
  return out;
}

GatedStepGeneration generate_step_gated(const SequenceModel& model, const ModelContext& ctx,
                                        const StepBoundaryRule& rule,
                                        const SamplerSettings& sampler, std::mt19937_64& rng,
                                        double tau) {
  rule.validate();
  GatedStepGeneration out;
  if (StepBoundaryRule::ends_with_any(ctx.text, rule.terminal_markers)) {
    out.stop_reason = StopReason::terminal;
    return out;
  }

  ModelContext scratch = ctx;
  std::string step_text;
  int step_tokens = 0;
  out.stop_reason = StopReason::max_tokens;
  while (step_tokens < rule.max_step_tokens) {
    TokenDistribution dist = model.next_distribution(scratch);
    if (prob::entropy(dist) > tau) {
      out.exceeded_at = step_tokens;
      out.trigger = std::move(dist);
      return out;
    }
    const TokenId id = pick_token(dist, sampler, rng);
    out.events.push_back({id, dist, step_tokens});
    out.tokens.push_back(id);
    scratch.append_token(model, id);
    step_text += model.token_text(id);
    ++step_tokens;

    if (StepBoundaryRule::ends_with_any(step_text, rule.terminal_markers) ||
        StepBoundaryRule::ends_with_any(scratch.text, rule.terminal_markers)) {
      out.stop_reason = StopReason::terminal;
      break;
    }
    if (StepBoundaryRule::ends_with_any(step_text, rule.delimiters)) {
      out.stop_reason = StopReason::delimiter;
      break;
    }
  }
  return out;
}

}  // namespace egb
