#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "egb/lm.hpp"

namespace egb {

/// One process-reward score for one reasoning step.
struct StepScore {
  double value = 0.0;  // in [0, 1]
  std::string scorer_id;
  double latency_ms = 0.0;
};

enum class AggregationRule { last, min, product, mean };

AggregationRule aggregation_rule_from_string(const std::string& s);
std::string to_string(AggregationRule r);

/// Collapses per-step scores into a single ranking key in [0, 1].
double aggregate_scores(const std::vector<StepScore>& step_scores, AggregationRule rule);

/// Process-reward verifier: scores the newest step of a candidate given the
/// problem context and the full step history.
class Verifier {
 public:
  virtual ~Verifier() = default;

  /// `steps` is the ordered list of completed step texts, the last one being
  /// the step under evaluation. Throws ParameterError on empty input.
  virtual StepScore score(const std::string& context,
                          const std::vector<std::string>& steps) = 0;

  virtual bool concurrent_safe() const { return true; }
};

/// Scores 1.0 while the candidate text is a prefix of the known-correct
/// solution for its problem, else 0.0. Problems are keyed by prompt text.
class OracleVerifier : public Verifier {
 public:
  void set_solution(const std::string& context, const std::string& correct_solution_text);
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override;

  static std::shared_ptr<OracleVerifier> load(const std::string& path);  // JSON map

 private:
  std::map<std::string, std::string> solutions_;
};

/// Deterministic lookup by newest-step text, with a default for misses.
class ScriptedVerifier : public Verifier {
 public:
  explicit ScriptedVerifier(double default_value = 0.5) : default_value_(default_value) {}
  void set_score(const std::string& step_text, double value);
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override;

  static std::shared_ptr<ScriptedVerifier> load(const std::string& path);  // JSON map

 private:
  std::map<std::string, double> table_;
  double default_value_;
};

/// Adapter for ad-hoc scoring rules in tests and the synthetic suite.
class FunctionVerifier : public Verifier {
 public:
  using Fn = std::function<double(const std::string&, const std::vector<std::string>&)>;
  explicit FunctionVerifier(Fn fn, std::string scorer_id = "fn")
      : fn_(std::move(fn)), scorer_id_(std::move(scorer_id)) {}
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override;

 private:
  Fn fn_;
  std::string scorer_id_;
};

/// Wraps another verifier and counts calls. Used by tests that assert the
/// dedup / ranking call-count contracts.
class CountingVerifier : public Verifier {
 public:
  explicit CountingVerifier(std::shared_ptr<Verifier> inner) : inner_(std::move(inner)) {}
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override {
    ++calls_;
    return inner_->score(context, steps);
  }
  long calls() const { return calls_; }

 private:
  std::shared_ptr<Verifier> inner_;
  long calls_ = 0;
};

struct RemoteOptions {
  std::string url;     // http://host:port
  std::string token;   // optional bearer token
  int timeout_ms = 5000;
  int max_retries = 3;
  int backoff_ms = 100;  // doubled per retry
};

/// Client for the remote PRM protocol: POST /v1/score
/// {context, steps:[...]} -> {step_scores:[float], scorer_id,
/// scores_are_logits?}. Logit-valued scores are mapped through the logistic
/// function; plain scores outside [0,1] are a validation error.
class RemotePrmVerifier : public Verifier {
 public:
  explicit RemotePrmVerifier(RemoteOptions options) : options_(std::move(options)) {}
  StepScore score(const std::string& context, const std::vector<std::string>& steps) override;

 private:
  RemoteOptions options_;
};

}  // namespace egb
