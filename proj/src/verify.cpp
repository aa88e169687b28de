#include "egb/verify.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace egb {

AggregationRule aggregation_rule_from_string(const std::string& s) {
  if (s == "last") return AggregationRule::last;
  if (s == "min") return AggregationRule::min;
  if (s == "product") return AggregationRule::product;
  if (s == "mean") return AggregationRule::mean;
  throw ConfigError("unknown aggregation rule \"" + s + "\"");
}

std::string to_string(AggregationRule r) {
  switch (r) {
    case AggregationRule::last: return "last";
    case AggregationRule::min: return "min";
    case AggregationRule::product: return "product";
    case AggregationRule::mean: return "mean";
  }
  return "?";
}

double aggregate_scores(const std::vector<StepScore>& step_scores, AggregationRule rule) {
  if (step_scores.empty()) throw ParameterError("aggregate_scores: empty score list");
  switch (rule) {
    case AggregationRule::last:
      return step_scores.back().value;
    case AggregationRule::min: {
      double m = 1.0;
      for (const auto& s : step_scores) m = std::min(m, s.value);
      return m;
    }
    case AggregationRule::product: {
      double p = 1.0;
      for (const auto& s : step_scores) p *= s.value;
      return p;
    }
    case AggregationRule::mean: {
      double sum = 0.0;
      for (const auto& s : step_scores) sum += s.value;
      return sum / static_cast<double>(step_scores.size());
    }
  }
  throw ParameterError("aggregate_scores: bad rule");
}

namespace {

void check_score_inputs(const std::string& context, const std::vector<std::string>& steps) {
  if (context.empty()) throw ParameterError("verifier: context must be non-empty");
  if (steps.empty()) throw ParameterError("verifier: at least one step required");
}

}  // namespace

void OracleVerifier::set_solution(const std::string& context,
                                  const std::string& correct_solution_text) {
  solutions_[context] = correct_solution_text;
}

StepScore OracleVerifier::score(const std::string& context,
                                const std::vector<std::string>& steps) {
  check_score_inputs(context, steps);
  auto it = solutions_.find(context);
  if (it == solutions_.end())
    throw ParameterError("oracle verifier has no solution for this context");
  std::string joined;
  for (const auto& s : steps) joined += s;
  const bool on_path = it->second.compare(0, joined.size(), joined) == 0;
  return {on_path ? 1.0 : 0.0, "oracle", 0.0};
}

std::shared_ptr<OracleVerifier> OracleVerifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open oracle verifier file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("oracle verifier JSON: ") + e.what());
  }
  auto v = std::make_shared<OracleVerifier>();
  for (auto& [ctx, sol] : j.items()) v->set_solution(ctx, sol.get<std::string>());
  return v;
}

void ScriptedVerifier::set_score(const std::string& step_text, double value) {
  if (value < 0.0 || value > 1.0)
    throw ParameterError("scripted verifier score must be in [0,1]");
  table_[step_text] = value;
}

StepScore ScriptedVerifier::score(const std::string& context,
                                  const std::vector<std::string>& steps) {
  check_score_inputs(context, steps);
  auto it = table_.find(steps.back());
  return {it == table_.end() ? default_value_ : it->second, "scripted", 0.0};
}

std::shared_ptr<ScriptedVerifier> ScriptedVerifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scripted verifier file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scripted verifier JSON: ") + e.what());
  }
  auto v = std::make_shared<ScriptedVerifier>(j.value("default", 0.5));
  if (j.contains("scores")) {
    for (auto& [step, val] : j["scores"].items()) v->set_score(step, val.get<double>());
  }
  return v;
}

StepScore FunctionVerifier::score(const std::string& context,
                                  const std::vector<std::string>& steps) {
  check_score_inputs(context, steps);
  const double v = fn_(context, steps);
  if (v < 0.0 || v > 1.0)
    throw ValidationError("function verifier returned " + std::to_string(v));
  return {v, scorer_id_, 0.0};
}

}  // namespace egb
