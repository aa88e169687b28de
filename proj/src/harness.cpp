#include "egb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace egb {

namespace {

const char* kMethodKey = "method";

std::string tau_to_string(double tau) {
  if (std::isinf(tau)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", tau);
  return buf;
}

double tau_from_json(const nlohmann::json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return kTauInfinity;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ConfigError("bad tau value \"" + s + "\"");
    }
  }
  return v.get<double>();
}

}  // namespace

nlohmann::json config_to_json(const SearchConfig& cfg) {
  return {{"tau", std::isinf(cfg.tau) ? nlohmann::json("inf") : nlohmann::json(cfg.tau)},
          {"beam_size", cfg.beam_size},
          {"beam_width", cfg.beam_width},
          {"max_steps", cfg.max_steps},
          {"base_temperature", cfg.base_temperature},
          {"branch_temperature", cfg.branch_temperature},
          {"seed", cfg.seed},
          {kMethodKey, to_string(cfg.method)},
          {"aggregation", to_string(cfg.aggregation)},
          {"rescore_history", cfg.rescore_history},
          {"gate_mode", cfg.gate_mode == GateMode::first_token ? "first_token" : "any_token"},
          {"certain_decode",
           cfg.certain_decode == CertainDecode::greedy ? "greedy" : "sample"},
          {"record_timing", cfg.record_timing},
          {"delimiters", cfg.step_rule.delimiters},
          {"max_step_tokens", cfg.step_rule.max_step_tokens},
          {"terminal_markers", cfg.step_rule.terminal_markers}};
}

SearchConfig config_from_json(const nlohmann::json& j, SearchConfig base) {
  try {
    if (j.contains("tau")) base.tau = tau_from_json(j["tau"]);
    if (j.contains("beam_size")) base.beam_size = j["beam_size"].get<int>();
    if (j.contains("beam_width")) base.beam_width = j["beam_width"].get<int>();
    if (j.contains("max_steps")) base.max_steps = j["max_steps"].get<int>();
    if (j.contains("base_temperature"))
      base.base_temperature = j["base_temperature"].get<double>();
    if (j.contains("branch_temperature"))
      base.branch_temperature = j["branch_temperature"].get<double>();
    if (j.contains("seed")) base.seed = j["seed"].get<uint64_t>();
    if (j.contains(kMethodKey)) base.method = method_from_string(j[kMethodKey]);
    if (j.contains("aggregation"))
      base.aggregation = aggregation_rule_from_string(j["aggregation"]);
    if (j.contains("rescore_history")) base.rescore_history = j["rescore_history"].get<bool>();
    if (j.contains("gate_mode")) {
      const std::string g = j["gate_mode"].get<std::string>();
      if (g == "any_token") base.gate_mode = GateMode::any_token;
      else if (g == "first_token") base.gate_mode = GateMode::first_token;
      else throw ConfigError("unknown gate_mode \"" + g + "\"");
    }
    if (j.contains("certain_decode")) {
      const std::string c = j["certain_decode"].get<std::string>();
      if (c == "sample") base.certain_decode = CertainDecode::sample;
      else if (c == "greedy") base.certain_decode = CertainDecode::greedy;
      else throw ConfigError("unknown certain_decode \"" + c + "\"");
    }
    if (j.contains("record_timing")) base.record_timing = j["record_timing"].get<bool>();
    if (j.contains("delimiters"))
      base.step_rule.delimiters = j["delimiters"].get<std::vector<std::string>>();
    if (j.contains("max_step_tokens"))
      base.step_rule.max_step_tokens = j["max_step_tokens"].get<int>();
    if (j.contains("terminal_markers"))
      base.step_rule.terminal_markers = j["terminal_markers"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  return base;
}

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : report.per_problem) {
    per.push_back({{"id", p.id},
                   {"predicted", p.predicted},
                   {"correct", p.correct},
                   {"candidates_generated", p.candidates_generated},
                   {"model_calls", p.model_calls},
                   {"verifier_calls", p.verifier_calls},
                   {"wall_time_ms", p.wall_time_ms},
                   {"failed", p.failed},
                   {"error", p.error}});
  }
  nlohmann::json j = {{kMethodKey, report.method},
                      {"config", config_to_json(report.config)},
                      {"per_problem", per},
                      {"aggregate",
                       {{"accuracy", report.accuracy},
                        {"mean_candidates", report.mean_candidates},
                        {"mean_wall_time", report.mean_wall_time},
                        {"total_budget", report.total_budget},
                        {"failures", report.failures}}}};
  if (!report.sweep_axis.empty()) {
    j["sweep"] = {{"axis", report.sweep_axis},
                  {"value", std::isinf(report.sweep_value)
                                ? nlohmann::json("inf")
                                : nlohmann::json(report.sweep_value)}};
  }
  if (!report.tuning_split.empty()) j["tuning_split"] = report.tuning_split;
  return j;
}

std::vector<Problem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path);
  std::vector<Problem> out;
  std::set<std::string> ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed dataset line: ") + e.what(), line_no);
    }
    Problem p;
    if (!j.contains("id") || !j["id"].is_string())
      throw ParseError("dataset schema: missing string field \"id\"", line_no);
    if (!j.contains("prompt") || !j["prompt"].is_string())
      throw ParseError("dataset schema: missing string field \"prompt\"", line_no);
    if (!j.contains("gold_answer") || !j["gold_answer"].is_string())
      throw ParseError("dataset schema: missing string field \"gold_answer\"", line_no);
    p.id = j["id"].get<std::string>();
    p.prompt = j["prompt"].get<std::string>();
    p.gold_answer = j["gold_answer"].get<std::string>();
    if (p.gold_answer.empty())
      throw ParseError("dataset schema: empty gold_answer for id \"" + p.id + "\"", line_no);
    if (j.contains("tags")) {
      if (!j["tags"].is_array())
        throw ParseError("dataset schema: \"tags\" must be an array", line_no);
      for (const auto& t : j["tags"]) p.tags.push_back(t.get<std::string>());
    }
    if (!ids.insert(p.id).second)
      throw ParseError("duplicate problem id \"" + p.id + "\"", line_no);
    out.push_back(std::move(p));
  }
  return out;
}

std::string normalize_answer(const std::string& s) {
  // Trim, case-fold, collapse internal whitespace.
  std::string t;
  bool in_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = !t.empty();
      continue;
    }
    if (in_space) t += ' ';
    in_space = false;
    t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  // Strip trailing punctuation.
  while (!t.empty()) {
    const char c = t.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?')
      t.pop_back();
    else
      break;
  }
  // Numeric canonicalization: when the whole string parses as a number,
  // replace it with a canonical rendering ("2.0" == "2").
  if (!t.empty()) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() + t.size() && std::isfinite(v)) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      t = buf;
    }
  }
  return t;
}

bool grade(const std::string& predicted, const std::string& gold) {
  return normalize_answer(predicted) == normalize_answer(gold);
}

std::string extract_answer(const std::string& solution_text,
                           const std::vector<std::string>& terminal_markers) {
  static const std::string kMarker = "answer:";
  std::string text = solution_text;
  const size_t pos = text.rfind(kMarker);
  if (pos != std::string::npos) text = text.substr(pos + kMarker.size());
  for (const auto& m : terminal_markers) {
    if (m.empty()) continue;
    size_t at;
    while ((at = text.find(m)) != std::string::npos) text.erase(at, m.size());
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

long budget_for(const SearchConfig& cfg) {
  switch (cfg.method) {
    case Method::standard: return 1;
    case Method::self_consistency: return cfg.beam_size;
    case Method::beam_search:
    case Method::egb: return static_cast<long>(cfg.beam_size) * cfg.beam_width;
  }
  return 0;
}

namespace {

/// Serializes next_distribution calls for models that are not concurrent-safe.
class SerialModel : public SequenceModel {
 public:
  SerialModel(const SequenceModel& inner, std::mutex& mu) : inner_(inner), mu_(mu) {}
  int vocab_size() const override { return inner_.vocab_size(); }
  std::string token_text(TokenId id) const override { return inner_.token_text(id); }
  std::vector<TokenId> tokenize(std::string_view text) const override {
    return inner_.tokenize(text);
  }
  TokenDistribution next_distribution(const ModelContext& ctx) const override {
    std::lock_guard<std::mutex> lock(mu_);
    return inner_.next_distribution(ctx);
  }
  bool concurrent_safe() const override { return true; }
  bool entropy_lower_bound() const override { return inner_.entropy_lower_bound(); }

 private:
  const SequenceModel& inner_;
  std::mutex& mu_;
};

class SerialVerifier : public Verifier {
 public:
  SerialVerifier(Verifier& inner, std::mutex& mu) : inner_(inner), mu_(mu) {}
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override {
    std::lock_guard<std::mutex> lock(mu_);
    return inner_.score(context, steps);
  }

 private:
  Verifier& inner_;
  std::mutex& mu_;
};

std::string endpoint_label(const SearchConfig& cfg) {
  if (cfg.method == Method::egb) {
    if (cfg.tau == 0.0) return "beam_search";
    if (std::isinf(cfg.tau)) return "self_consistency";
  }
  return to_string(cfg.method);
}

ProblemResult solve_problem(const Problem& problem, const SearchConfig& base,
                            const SequenceModel& model, Verifier& verifier) {
  ProblemResult r;
  r.id = problem.id;
  SearchConfig cfg = base;
  cfg.seed = seeding::splitmix64(base.seed ^ seeding::hash_string(problem.id));
  try {
    SearchResult sr = run_search(problem.prompt, cfg, model, verifier);
    if (cfg.method == Method::self_consistency) {
      std::vector<std::pair<std::string, double>> votes;
      for (const Beam& b : sr.all_beams) {
        if (!b.finished) continue;
        votes.emplace_back(
            extract_answer(b.solution_text(), cfg.step_rule.terminal_markers),
            b.aggregate(cfg.aggregation));
      }
      if (votes.empty()) {
        for (const Beam& b : sr.all_beams)
          votes.emplace_back(
              extract_answer(b.solution_text(), cfg.step_rule.terminal_markers),
              b.aggregate(cfg.aggregation));
      }
      r.predicted = self_consistency_vote(votes);
    } else {
      r.predicted =
          extract_answer(sr.best_beam().solution_text(), cfg.step_rule.terminal_markers);
    }
    r.correct = grade(r.predicted, problem.gold_answer);
    r.candidates_generated = sr.total_candidates_generated;
    r.model_calls = sr.total_model_calls;
    r.verifier_calls = sr.total_verifier_calls;
    r.wall_time_ms = sr.wall_time_ms;
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

}  // namespace

RunReport run_benchmark(const std::vector<Problem>& dataset, const SearchConfig& cfg,
                        const SequenceModel& model, Verifier& verifier, int workers) {
  if (dataset.empty()) throw ParameterError("run_benchmark: empty dataset");
  if (workers < 1) throw ParameterError("run_benchmark: workers must be >= 1");
  cfg.validate();

  std::mutex model_mu, verifier_mu;
  const bool serialize_model = !model.concurrent_safe();
  const bool serialize_verifier = !verifier.concurrent_safe();
  SerialModel serial_model(model, model_mu);
  SerialVerifier serial_verifier(verifier, verifier_mu);
  const SequenceModel& m = serialize_model && workers > 1
                               ? static_cast<const SequenceModel&>(serial_model)
                               : model;
  Verifier& v = serialize_verifier && workers > 1 ? static_cast<Verifier&>(serial_verifier)
                                                  : verifier;

  std::vector<ProblemResult> results(dataset.size());
  if (workers == 1) {
    for (size_t i = 0; i < dataset.size(); ++i)
      results[i] = solve_problem(dataset[i], cfg, m, v);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(dataset.size()));
    for (int w = 0; w < n; ++w) {
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < dataset.size(); i = next.fetch_add(1))
          results[i] = solve_problem(dataset[i], cfg, m, v);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::sort(results.begin(), results.end(),
            [](const ProblemResult& a, const ProblemResult& b) { return a.id < b.id; });

  RunReport report;
  report.method = endpoint_label(cfg);
  report.config = cfg;
  report.per_problem = std::move(results);
  long correct = 0;
  double cand_sum = 0.0, time_sum = 0.0;
  for (const auto& p : report.per_problem) {
    if (p.failed) {
      ++report.failures;
      continue;
    }
    if (p.correct) ++correct;
    cand_sum += static_cast<double>(p.candidates_generated);
    time_sum += p.wall_time_ms;
  }
  const double n = static_cast<double>(report.per_problem.size());
  report.accuracy = static_cast<double>(correct) / n;
  report.mean_candidates = cand_sum / n;
  report.mean_wall_time = time_sum / n;
  report.total_budget = budget_for(cfg);
  return report;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "tau") return SweepAxis::tau;
  if (s == "K") return SweepAxis::K;
  if (s == "W") return SweepAxis::W;
  if (s == "budget") return SweepAxis::budget;
  throw ConfigError("unknown sweep axis \"" + s + "\"");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau: return "tau";
    case SweepAxis::K: return "K";
    case SweepAxis::W: return "W";
    case SweepAxis::budget: return "budget";
  }
  return "?";
}

std::vector<RunReport> sweep(const std::vector<Problem>& dataset, const SearchConfig& base,
                             SweepAxis axis, const std::vector<double>& values,
                             const SequenceModel& model, Verifier& verifier, int workers) {
  if (values.empty()) throw ParameterError("sweep: empty value list");
  std::vector<RunReport> reports;
  reports.reserve(values.size());
  for (double value : values) {
    SearchConfig cfg = base;
    switch (axis) {
      case SweepAxis::tau:
        cfg.method = Method::egb;
        cfg.tau = value;
        break;
      case SweepAxis::K:
        cfg.beam_size = static_cast<int>(value);
        break;
      case SweepAxis::W:
        cfg.beam_width = static_cast<int>(value);
        break;
      case SweepAxis::budget:
        // Budget maps onto the method's own knob: sample count for
        // self-consistency, K at fixed W for beam-style methods.
        if (cfg.method == Method::self_consistency || cfg.method == Method::standard) {
          cfg.method = Method::self_consistency;
          cfg.tau = kTauInfinity;
          cfg.beam_size = std::max(1, static_cast<int>(value));
        } else {
          cfg.beam_size =
              std::max(1, static_cast<int>(value) / std::max(1, cfg.beam_width));
        }
        break;
    }
    const std::string key = to_string(axis) + "=" +
                            (std::isinf(value) ? std::string("inf") : tau_to_string(value));
    cfg.seed = seeding::splitmix64(base.seed ^ seeding::hash_string(key));
    cfg.validate();
    RunReport r = run_benchmark(dataset, cfg, model, verifier, workers);
    r.sweep_axis = to_string(axis);
    r.sweep_value = value;
    reports.push_back(std::move(r));
  }
  return reports;
}

SpikeProfile spike_profile_from_string(const std::string& s) {
  if (s == "none") return SpikeProfile::none;
  if (s == "all_forks") return SpikeProfile::all_forks;
  if (s == "mixed") return SpikeProfile::mixed;
  throw ConfigError("unknown spike profile \"" + s + "\"");
}

SyntheticSuite build_synthetic_suite(const SuiteSpec& spec) {
  if (spec.n_problems < 1) throw ParameterError("build_synthetic_suite: n_problems >= 1");
  if (spec.fork_depth < 1) throw ParameterError("build_synthetic_suite: fork_depth >= 1");
  if (spec.fork_low_prob <= 0.0 || spec.fork_low_prob > 0.5)
    throw ParameterError("build_synthetic_suite: fork_low_prob in (0, 0.5]");

  SyntheticSuite suite;
  suite.step_rule.delimiters = {".\n"};
  suite.step_rule.terminal_markers = {"<eos>"};
  suite.step_rule.max_step_tokens = 16;
  suite.model = std::make_shared<ScriptedModel>();
  suite.verifier = std::make_shared<OracleVerifier>();

  ScriptedModel& m = *suite.model;
  m.add_token(".\n");
  m.add_token("answer: ");
  m.add_token("<eos>");
  for (int d = 1; d <= spec.fork_depth; ++d) {
    m.add_token("L" + std::to_string(d) + " ");
    m.add_token("R" + std::to_string(d) + " ");
  }
  // Leaf answer tokens: every possible path string.
  const int n_leaves = 1 << spec.fork_depth;
  auto path_string = [&](int leaf) {
    std::string s;
    for (int d = 0; d < spec.fork_depth; ++d) s += (leaf >> d) & 1 ? 'R' : 'L';
    return s;
  };
  for (int leaf = 0; leaf < n_leaves; ++leaf) m.add_token(path_string(leaf));

  auto rng = seeding::make_rng(seeding::splitmix64(spec.seed));
  const double low = spec.fork_low_prob;

  for (int i = 0; i < spec.n_problems; ++i) {
    const std::string prompt = "Q" + std::to_string(i) + ") ";
    m.add_token(prompt);

    // The correct leaf is drawn per problem; model probabilities do not
    // reveal it (forks are symmetric unless spike_profile flattens them).
    const int correct_leaf = static_cast<int>(rng() % static_cast<uint64_t>(n_leaves));
    const std::string correct = path_string(correct_leaf);

    // Walk every internal path and lay down its rows.
    std::vector<std::string> frontier{prompt};
    for (int d = 1; d <= spec.fork_depth; ++d) {
      const bool fork_here = spec.spike_profile == SpikeProfile::all_forks ||
                             (spec.spike_profile == SpikeProfile::mixed && d % 2 == 1);
      const std::string l = "L" + std::to_string(d) + " ";
      const std::string r = "R" + std::to_string(d) + " ";
      std::vector<std::string> next_frontier;
      for (const auto& ctx : frontier) {
        if (fork_here) {
          m.set_row_text(ctx, {{l, 0.5}, {r, 0.5}});
        } else {
          // Near-deterministic: a small spike toward the wrong side keeps the
          // row stochastic without crossing usual thresholds.
          const bool correct_is_l = correct[static_cast<size_t>(d - 1)] == 'L';
          m.set_row_text(ctx, {{correct_is_l ? l : r, 1.0 - low},
                               {correct_is_l ? r : l, low}});
        }
        m.set_row_text(ctx + l, {{".\n", 1.0}});
        m.set_row_text(ctx + r, {{".\n", 1.0}});
        next_frontier.push_back(ctx + l + ".\n");
        next_frontier.push_back(ctx + r + ".\n");
      }
      frontier = std::move(next_frontier);
    }
    // Leaves: emit "answer: <path><eos>".
    for (int leaf = 0; leaf < n_leaves; ++leaf) {
      std::string ctx = prompt;
      std::string path;
      for (int d = 1; d <= spec.fork_depth; ++d) {
        const char side = path_string(leaf)[static_cast<size_t>(d - 1)];
        ctx += std::string(1, side) + std::to_string(d) + " .\n";
        path += side;
      }
      m.set_row_text(ctx, {{"answer: ", 1.0}});
      m.set_row_text(ctx + "answer: ", {{path, 1.0}});
      m.set_row_text(ctx + "answer: " + path, {{"<eos>", 1.0}});
    }

    std::string solution;
    for (int d = 1; d <= spec.fork_depth; ++d)
      solution += std::string(1, correct[static_cast<size_t>(d - 1)]) +
                  std::to_string(d) + " .\n";
    solution += "answer: " + correct + "<eos>";
    suite.verifier->set_solution(prompt, solution);

    Problem p;
    p.id = "synthetic-" + std::to_string(i);
    p.prompt = prompt;
    p.gold_answer = correct;
    p.tags = {"synthetic"};
    suite.problems.push_back(std::move(p));
    suite.correct_paths.push_back(correct);
  }
  return suite;
}

}  // namespace egb
