#include "egb/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace egb {

Method method_from_string(const std::string& s) {
  if (s == "standard") return Method::standard;
  if (s == "beam_search") return Method::beam_search;
  if (s == "egb") return Method::egb;
  if (s == "self_consistency") return Method::self_consistency;
  throw ConfigError("unknown method \"" + s + "\"");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::standard: return "standard";
    case Method::beam_search: return "beam_search";
    case Method::egb: return "egb";
    case Method::self_consistency: return "self_consistency";
  }
  return "?";
}

std::string to_string(SamplerState s) {
  switch (s) {
    case SamplerState::certain: return "certain";
    case SamplerState::uncertain: return "uncertain";
    case SamplerState::branch_point: return "branch_point";
  }
  return "?";
}

void SearchConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size K must be >= 1");
  if (beam_width < 1) throw ConfigError("beam_width W must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps T must be >= 1");
  if (!(base_temperature > 0.0)) throw ConfigError("base_temperature must be > 0");
  if (!(branch_temperature > 0.0)) throw ConfigError("branch_temperature must be > 0");
  if (std::isnan(tau) || tau < 0.0) throw ConfigError("tau must be >= 0");
  step_rule.validate();
  switch (method) {
    case Method::beam_search:
      if (tau != 0.0) throw ConfigError("method beam_search forces tau = 0");
      break;
    case Method::self_consistency:
      if (!std::isinf(tau)) throw ConfigError("method self_consistency forces tau = inf");
      break;
    case Method::standard:
      if (!std::isinf(tau)) throw ConfigError("method standard forces tau = inf");
      if (beam_size != 1 || beam_width != 1)
        throw ConfigError("method standard forces K = 1 and W = 1");
      break;
    case Method::egb:
      break;
  }
}

SearchConfig config_for_method(Method m, SearchConfig base) {
  base.method = m;
  switch (m) {
    case Method::standard:
      base.tau = kTauInfinity;
      base.beam_size = 1;
      base.beam_width = 1;
      break;
    case Method::beam_search:
      base.tau = 0.0;
      break;
    case Method::self_consistency:
      base.tau = kTauInfinity;
      break;
    case Method::egb:
      break;
  }
  return base;
}

std::string Beam::solution_text() const {
  return ctx.text.substr(prompt_text.size());
}

double Beam::aggregate(AggregationRule rule) const {
  if (steps.empty()) return 0.0;
  std::vector<StepScore> scores;
  scores.reserve(steps.size());
  for (const auto& [text, score] : steps) scores.push_back(score);
  return aggregate_scores(scores, rule);
}

std::optional<int> detect_first_exceedance(const std::vector<GenerationEvent>& events,
                                           double tau) {
  for (const auto& e : events) {
    if (prob::entropy(e.distribution) > tau) return e.position;
  }
  return std::nullopt;
}

namespace {

using seeding::candidate_seed;
using seeding::Domain;
using seeding::root_seed;

/// Counts next_distribution calls on behalf of the engine.
class CountingModel : public SequenceModel {
 public:
  explicit CountingModel(const SequenceModel& inner) : inner_(inner) {}
  int vocab_size() const override { return inner_.vocab_size(); }
  std::string token_text(TokenId id) const override { return inner_.token_text(id); }
  std::vector<TokenId> tokenize(std::string_view text) const override {
    return inner_.tokenize(text);
  }
  TokenDistribution next_distribution(const ModelContext& ctx) const override {
    ++calls_;
    return inner_.next_distribution(ctx);
  }
  bool concurrent_safe() const override { return inner_.concurrent_safe(); }
  bool entropy_lower_bound() const override { return inner_.entropy_lower_bound(); }
  long calls() const { return calls_; }

 private:
  const SequenceModel& inner_;
  mutable long calls_ = 0;
};

SamplerSettings certain_sampler(const SearchConfig& cfg) {
  return {cfg.base_temperature, cfg.certain_decode == CertainDecode::greedy};
}

void fill_candidate_common(PoolEntry& e, const Beam& beam, const SequenceModel& model) {
  e.context_text = beam.prompt_text;
  for (const auto& [text, score] : beam.steps) {
    e.prior_steps.push_back(text);
    e.prior_scores.push_back(score);
  }
  e.full_tokens = beam.ctx.token_ids;
  e.full_tokens.insert(e.full_tokens.end(), e.step_tokens.begin(), e.step_tokens.end());
  e.step_text.clear();
  for (TokenId id : e.step_tokens) e.step_text += model.token_text(id);
}

PoolEntry make_passthrough(const Beam& beam, int slot) {
  PoolEntry e;
  e.source_beam_index = slot;
  e.branch_index = 0;
  e.passthrough_finished = true;
  e.beam_seed = beam.seed;
  e.context_text = beam.prompt_text;
  for (const auto& [text, score] : beam.steps) {
    e.prior_steps.push_back(text);
    e.prior_scores.push_back(score);
  }
  e.full_tokens = beam.ctx.token_ids;
  return e;
}

/// Single continuation for a certain beam. `branch_index` and
/// `parent_seed` are overridable for the step-1 K-way initialization.
PoolEntry expand_certain(const Beam& beam, int slot, int step_index, int branch_index,
                         uint64_t parent_seed, const SearchConfig& cfg,
                         const SequenceModel& model) {
  const uint64_t seed = candidate_seed(parent_seed, static_cast<uint64_t>(step_index), 0,
                                       Domain::step);
  auto rng = seeding::make_rng(seed);
  StepGeneration gen =
      generate_step(model, beam.ctx, cfg.step_rule, certain_sampler(cfg), rng);
  PoolEntry e;
  e.source_beam_index = slot;
  e.branch_index = branch_index;
  e.step_tokens = std::move(gen.tokens);
  e.events = std::move(gen.events);
  e.stop_reason = gen.stop_reason;
  e.beam_seed = seed;
  fill_candidate_common(e, beam, model);
  return e;
}

}  // namespace

std::vector<PoolEntry> rollback_and_branch(const Beam& beam,
                                           const std::vector<TokenId>& prefix_tokens,
                                           const std::vector<GenerationEvent>& prefix_events,
                                           const TokenDistribution& trigger, int t_star,
                                           int step_index, const SearchConfig& cfg,
                                           const SequenceModel& model) {
  const double trigger_entropy = prob::entropy(trigger);
  const auto support = prob::support_by_probability(trigger);
  const TokenDistribution branch_dist =
      prob::apply_temperature(trigger, cfg.branch_temperature);

  std::vector<PoolEntry> out;
  out.reserve(static_cast<size_t>(cfg.beam_width));
  for (int j = 0; j < cfg.beam_width; ++j) {
    const uint64_t seed = candidate_seed(beam.seed, static_cast<uint64_t>(step_index),
                                         static_cast<uint64_t>(j), Domain::branch);
    auto rng = seeding::make_rng(seed);
    // Diverse expansion: the first branches take the top tokens of the
    // triggering distribution; once the support is exhausted, extra branches
    // sample (the duplicates they produce are removed downstream).
    TokenId branch_token;
    if (j < static_cast<int>(support.size())) {
      branch_token = support[static_cast<size_t>(j)];
    } else {
      branch_token = prob::sample(branch_dist, rng);
    }

    std::vector<TokenId> preamble = prefix_tokens;
    preamble.push_back(branch_token);
    SamplerSettings branch_sampler{cfg.branch_temperature, false};
    StepGeneration cont =
        generate_step(model, beam.ctx, cfg.step_rule, branch_sampler, rng, preamble);

    PoolEntry e;
    e.source_beam_index = beam.id;
    e.branch_index = j;
    e.step_tokens = std::move(preamble);
    e.step_tokens.insert(e.step_tokens.end(), cont.tokens.begin(), cont.tokens.end());
    e.events = prefix_events;
    e.events.push_back({branch_token, trigger, t_star});
    e.events.insert(e.events.end(), cont.events.begin(), cont.events.end());
    e.stop_reason = cont.stop_reason;
    e.beam_seed = seed;
    e.t_star = t_star;
    e.trigger_entropy_bits = trigger_entropy;
    e.from_uncertain_beam = true;
    fill_candidate_common(e, beam, model);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

/// Expands one unfinished beam: single certain continuation or W branches.
std::vector<PoolEntry> expand_one_beam(const Beam& beam, int slot, int step_index,
                                       const SearchConfig& cfg, const SequenceModel& model,
                                       double tau) {
  if (cfg.gate_mode == GateMode::first_token) {
    TokenDistribution first = model.next_distribution(beam.ctx);
    if (prob::entropy(first) > tau) {
      Beam b = beam;
      b.id = slot;
      return rollback_and_branch(b, {}, {}, first, 0, step_index, cfg, model);
    }
    return {expand_certain(beam, slot, step_index, 0, beam.seed, cfg, model)};
  }

  const uint64_t seed = candidate_seed(beam.seed, static_cast<uint64_t>(step_index), 0,
                                       Domain::step);
  auto rng = seeding::make_rng(seed);
  GatedStepGeneration gated =
      generate_step_gated(model, beam.ctx, cfg.step_rule, certain_sampler(cfg), rng, tau);
  if (gated.exceeded_at) {
    Beam b = beam;
    b.id = slot;
    return rollback_and_branch(b, gated.tokens, gated.events, *gated.trigger,
                               *gated.exceeded_at, step_index, cfg, model);
  }
  PoolEntry e;
  e.source_beam_index = slot;
  e.branch_index = 0;
  e.step_tokens = std::move(gated.tokens);
  e.events = std::move(gated.events);
  e.stop_reason = gated.stop_reason;
  e.beam_seed = seed;
  fill_candidate_common(e, beam, model);
  return {e};
}

CandidatePool expand_step_impl(const std::vector<Beam>& beams, int step_index,
                               const SearchConfig& cfg, const SequenceModel& model,
                               double tau) {
  if (beams.empty()) throw ParameterError("expand_step: no beams");
  CandidatePool pool;

  // Step 1 starts from the lone root: W branches when uncertain, otherwise K
  // diverse samples from derived root seeds.
  if (step_index == 1 && beams.size() == 1 && beams[0].steps.empty()) {
    const Beam& root = beams[0];
    auto entries = expand_one_beam(root, 0, step_index, cfg, model, tau);
    if (!entries.empty() && entries[0].t_star) {
      pool.uncertain_beams = 1;
      pool.entries = std::move(entries);
      return pool;
    }
    pool.entries = std::move(entries);
    pool.certain_entries = 1;
    for (int j = 1; j < cfg.beam_size; ++j) {
      Beam alt = root;
      alt.seed = root_seed(cfg.seed, static_cast<uint64_t>(j));
      pool.entries.push_back(
          expand_certain(alt, 0, step_index, j, alt.seed, cfg, model));
      ++pool.certain_entries;
    }
    return pool;
  }

  for (size_t slot = 0; slot < beams.size(); ++slot) {
    const Beam& beam = beams[slot];
    if (beam.finished) {
      pool.entries.push_back(make_passthrough(beam, static_cast<int>(slot)));
      ++pool.finished_entries;
      continue;
    }
    auto entries = expand_one_beam(beam, static_cast<int>(slot), step_index, cfg, model, tau);
    if (!entries.empty() && entries[0].t_star) {
      ++pool.uncertain_beams;
    } else {
      ++pool.certain_entries;
    }
    for (auto& e : entries) pool.entries.push_back(std::move(e));
  }
  return pool;
}

}  // namespace

CandidatePool expand_step(const std::vector<Beam>& beams, int step_index,
                          const SearchConfig& cfg, const SequenceModel& model) {
  return expand_step_impl(beams, step_index, cfg, model, cfg.tau);
}

void dedup(CandidatePool& pool) {
  std::set<std::vector<TokenId>> seen;
  std::vector<PoolEntry> kept;
  kept.reserve(pool.entries.size());
  for (auto& e : pool.entries) {  // entries are already in (beam, branch) order
    if (seen.insert(e.full_tokens).second) {
      kept.push_back(std::move(e));
    } else {
      pool.removed.push_back(std::move(e));
      ++pool.dedup_removed;
    }
  }
  pool.entries = std::move(kept);
}

std::vector<ScoredCandidate> rank_candidates(const CandidatePool& pool, Verifier& verifier,
                                             AggregationRule rule, bool rescore_history) {
  std::vector<ScoredCandidate> scored;
  scored.reserve(pool.entries.size());
  for (size_t i = 0; i < pool.entries.size(); ++i) {
    const PoolEntry& e = pool.entries[i];
    ScoredCandidate sc;
    sc.pool_index = i;
    if (e.passthrough_finished) {
      sc.step_scores = e.prior_scores;
    } else {
      std::vector<std::string> steps = e.prior_steps;
      steps.push_back(e.step_text);
      if (rescore_history) {
        for (size_t n = 1; n <= steps.size(); ++n) {
          std::vector<std::string> head(steps.begin(), steps.begin() + static_cast<long>(n));
          sc.step_scores.push_back(verifier.score(e.context_text, head));
        }
      } else {
        sc.step_scores = e.prior_scores;
        sc.step_scores.push_back(verifier.score(e.context_text, steps));
      }
      for (const auto& s : sc.step_scores) {
        if (s.value < 0.0 || s.value > 1.0)
          throw ValidationError("verifier score " + std::to_string(s.value) +
                                " outside [0,1]");
      }
    }
    sc.aggregate = sc.step_scores.empty() ? 0.0 : aggregate_scores(sc.step_scores, rule);
    scored.push_back(std::move(sc));
  }

  std::stable_sort(scored.begin(), scored.end(),
                   [&pool](const ScoredCandidate& a, const ScoredCandidate& b) {
                     if (a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
                     const PoolEntry& ea = pool.entries[a.pool_index];
                     const PoolEntry& eb = pool.entries[b.pool_index];
                     if (ea.source_beam_index != eb.source_beam_index)
                       return ea.source_beam_index < eb.source_beam_index;
                     return ea.branch_index < eb.branch_index;
                   });
  return scored;
}

namespace {

Beam materialize(const PoolEntry& entry, const ScoredCandidate& scored,
                 const std::vector<Beam>& beams, int slot, int step_index,
                 const SequenceModel& model) {
  Beam b = beams.at(static_cast<size_t>(entry.source_beam_index));
  b.id = slot;
  if (entry.passthrough_finished) return b;

  b.seed = entry.beam_seed;
  b.ctx.append(model, entry.step_tokens);
  // Under history rescoring the prior steps' stored scores are refreshed.
  for (size_t i = 0; i + 1 < scored.step_scores.size() && i < b.steps.size(); ++i)
    b.steps[i].second = scored.step_scores[i];
  b.steps.emplace_back(entry.step_text, scored.step_scores.back());

  const bool lower_bound = model.entropy_lower_bound();
  for (const auto& ev : entry.events) {
    UncertaintyReading u = prob::uncertainty(ev.distribution);
    TokenTrace t;
    t.step_index = step_index;
    t.token_id = ev.token_id;
    t.token_text = model.token_text(ev.token_id);
    t.entropy_bits = u.entropy_bits;
    t.varentropy_bits2 = u.varentropy_bits2;
    t.entropy_lower_bound = lower_bound;
    if (entry.t_star && ev.position == *entry.t_star) {
      t.state = SamplerState::branch_point;
      t.branched = true;
    } else if (entry.t_star && ev.position > *entry.t_star) {
      t.state = SamplerState::uncertain;
    } else {
      t.state = SamplerState::certain;
    }
    b.trace.push_back(t);
  }
  if (entry.t_star)
    b.branch_events.push_back({step_index, *entry.t_star, entry.trigger_entropy_bits});
  b.finished = entry.stop_reason == StopReason::terminal;
  return b;
}

SearchResult run_loop(const std::string& problem, const SearchConfig& cfg,
                      const SequenceModel& raw_model, Verifier& verifier, double tau) {
  const auto t0 = std::chrono::steady_clock::now();
  CountingModel model(raw_model);
  CountingVerifier counting_verifier(
      std::shared_ptr<Verifier>(&verifier, [](Verifier*) {}));

  SearchResult result;
  result.config = cfg;

  Beam root;
  root.id = 0;
  root.seed = cfg.seed;
  root.ctx = ModelContext::from_text(model, problem);
  root.prompt_text = root.ctx.text;
  std::vector<Beam> beams{root};

  if (StepBoundaryRule::ends_with_any(root.ctx.text, cfg.step_rule.terminal_markers)) {
    root.finished = true;
    result.all_beams = {root};
    result.best_index = 0;
    return result;
  }

  const int K = cfg.beam_size;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    bool any_unfinished = false;
    for (const auto& b : beams)
      if (!b.finished) any_unfinished = true;
    if (!any_unfinished) break;

    CandidatePool pool = expand_step_impl(beams, step, cfg, model, tau);

    StepStats stats;
    stats.step_index = step;
    stats.pool_pre_dedup = static_cast<int>(pool.entries.size());
    stats.certain_entries = pool.certain_entries;
    stats.uncertain_beams = pool.uncertain_beams;
    stats.finished_entries = pool.finished_entries;
    result.per_step_pool_sizes.push_back(stats.pool_pre_dedup);
    result.total_candidates_generated +=
        stats.pool_pre_dedup - stats.finished_entries;

    dedup(pool);
    stats.dedup_removed = pool.dedup_removed;
    result.step_stats.push_back(stats);

    auto scored =
        rank_candidates(pool, counting_verifier, cfg.aggregation, cfg.rescore_history);

    std::vector<Beam> next;
    next.reserve(static_cast<size_t>(K));
    for (const auto& sc : scored) {
      if (static_cast<int>(next.size()) >= K) break;
      next.push_back(materialize(pool.entries[sc.pool_index], sc, beams,
                                 static_cast<int>(next.size()), step, model));
    }
    // Fill remaining slots. First restore dedup-removed twins under their own
    // seeds (identical text, independent randomness from here on), then fall
    // back to reseeded replicas of unfinished survivors.
    if (static_cast<int>(next.size()) < K && !pool.removed.empty()) {
      for (const auto& sc : scored) {
        if (static_cast<int>(next.size()) >= K) break;
        const auto& twin = pool.entries[sc.pool_index];
        for (const auto& rem : pool.removed) {
          if (static_cast<int>(next.size()) >= K) break;
          if (rem.full_tokens == twin.full_tokens)
            next.push_back(materialize(rem, sc, beams, static_cast<int>(next.size()), step,
                                       model));
        }
      }
    }
    if (static_cast<int>(next.size()) < K) {
      std::vector<size_t> live;
      for (size_t i = 0; i < next.size(); ++i)
        if (!next[i].finished) live.push_back(i);
      int replica = 0;
      while (!live.empty() && static_cast<int>(next.size()) < K) {
        Beam clone = next[live[static_cast<size_t>(replica) % live.size()]];
        clone.id = static_cast<int>(next.size());
        clone.seed = candidate_seed(clone.seed, static_cast<uint64_t>(step),
                                    static_cast<uint64_t>(replica), Domain::replica);
        next.push_back(std::move(clone));
        ++replica;
      }
    }
    beams = std::move(next);
  }

  // Best beam: highest aggregate among finished beams, falling back to all.
  result.all_beams = beams;
  int best = -1;
  double best_score = -1.0;
  for (size_t i = 0; i < beams.size(); ++i) {
    if (!beams[i].finished) continue;
    const double a = beams[i].aggregate(cfg.aggregation);
    if (a > best_score) {
      best_score = a;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    for (size_t i = 0; i < beams.size(); ++i) {
      const double a = beams[i].aggregate(cfg.aggregation);
      if (a > best_score) {
        best_score = a;
        best = static_cast<int>(i);
      }
    }
  }
  result.best_index = std::max(best, 0);
  result.total_model_calls = model.calls();
  result.total_verifier_calls = counting_verifier.calls();
  if (cfg.record_timing) {
    result.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return result;
}

}  // namespace

SearchResult run_search(const std::string& problem, const SearchConfig& cfg,
                        const SequenceModel& model, Verifier& verifier) {
  cfg.validate();
  if (cfg.method == Method::beam_search) return run_beam_search(problem, cfg, model, verifier);
  return run_loop(problem, cfg, model, verifier, cfg.tau);
}

SearchResult run_beam_search(const std::string& problem, const SearchConfig& cfg,
                             const SequenceModel& model, Verifier& verifier) {
  SearchConfig bs = cfg;
  bs.validate();
  // Uniform expansion: every step, every beam with a stochastic position is
  // expanded W ways; fully deterministic steps cannot yield distinct
  // branches and contribute a single candidate.
  return run_loop(problem, bs, model, verifier, 0.0);
}

std::string self_consistency_vote(const std::vector<std::string>& answers) {
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(answers.size());
  for (const auto& a : answers) scored.emplace_back(a, 0.0);
  return self_consistency_vote(scored);
}

std::string self_consistency_vote(
    const std::vector<std::pair<std::string, double>>& answers_with_scores) {
  if (answers_with_scores.empty())
    throw ParameterError("self_consistency_vote: empty answer list");
  struct Tally {
    int count = 0;
    double score_sum = 0.0;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& [answer, score] : answers_with_scores) {
    auto& t = tallies[answer];
    ++t.count;
    t.score_sum += score;
  }
  std::string best;
  int best_count = -1;
  double best_mean = -1.0;
  for (const auto& [answer, t] : tallies) {
    const double mean = t.score_sum / t.count;
    const bool wins = t.count > best_count ||
                      (t.count == best_count && mean > best_mean) ||
                      (t.count == best_count && mean == best_mean && answer < best);
    if (wins) {
      best = answer;
      best_count = t.count;
      best_mean = mean;
    }
  }
  return best;
}

}  // namespace egb
