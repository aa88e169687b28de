#include <algorithm>

#include "doctest.h"

#include "egb/search.hpp"
#include "egb/seeding.hpp"

using namespace egb;

namespace {

std::vector<StepScore> scores(std::initializer_list<double> vs) {
  std::vector<StepScore> out;
  for (double v : vs) out.push_back({v, "t", 0.0});
  return out;
}

}  // namespace

TEST_CASE("aggregation rules") {
  for (auto rule : {AggregationRule::last, AggregationRule::min, AggregationRule::product,
                    AggregationRule::mean})
    CHECK(aggregate_scores(scores({0.9}), rule) == 0.9);
  CHECK(aggregate_scores(scores({0.8, 0.5, 0.9}), AggregationRule::min) == 0.5);
  CHECK(aggregate_scores(scores({0.8, 0.5}), AggregationRule::product) ==
        doctest::Approx(0.4).epsilon(1e-12));
  CHECK(aggregate_scores(scores({0.8, 0.5, 0.9}), AggregationRule::last) == 0.9);
  CHECK(aggregate_scores(scores({0.2, 0.4}), AggregationRule::mean) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(aggregate_scores({}, AggregationRule::last), ParameterError);
  CHECK(aggregation_rule_from_string("product") == AggregationRule::product);
  CHECK_THROWS_AS(aggregation_rule_from_string("median"), ConfigError);
}

TEST_CASE("oracle verifier scores prefixes of the known solution") {
  OracleVerifier v;
  v.set_solution("Q", "1 + 1 = 2.\nanswer: 2<eos>");
  CHECK(v.score("Q", {"1 + 1 = 2.\n"}).value == 1.0);
  CHECK(v.score("Q", {"1 + 1 = 2.\n", "answer: 2<eos>"}).value == 1.0);
  CHECK(v.score("Q", {"1 + 1 = 3.\n"}).value == 0.0);
  CHECK(v.score("Q", {"1 + 1 = 2.\n", "answer: 3<eos>"}).value == 0.0);
  CHECK_THROWS_AS(v.score("unknown", {"x"}), ParameterError);
  CHECK_THROWS_AS(v.score("Q", {}), ParameterError);
  CHECK_THROWS_AS(v.score("", {"x"}), ParameterError);
}

TEST_CASE("scripted verifier is a deterministic lookup with default") {
  ScriptedVerifier v(0.5);
  v.set_score("good step", 0.9);
  v.set_score("bad step", 0.1);
  CHECK(v.score("ctx", {"good step"}).value == 0.9);
  CHECK(v.score("ctx", {"good step", "bad step"}).value == 0.1);  // newest step decides
  CHECK(v.score("ctx", {"unknown"}).value == 0.5);
  CHECK(v.score("ctx", {"unknown"}).value == v.score("ctx", {"unknown"}).value);
  CHECK_THROWS_AS(v.set_score("x", 1.5), ParameterError);
}

TEST_CASE("function verifier validates its output range") {
  FunctionVerifier good([](const std::string&, const std::vector<std::string>&) {
    return 0.25;
  });
  CHECK(good.score("c", {"s"}).value == 0.25);
  FunctionVerifier bad([](const std::string&, const std::vector<std::string>&) {
    return 1.5;
  });
  CHECK_THROWS_AS(bad.score("c", {"s"}), ValidationError);
}

TEST_CASE("counting verifier counts") {
  auto inner = std::make_shared<ScriptedVerifier>(0.5);
  CountingVerifier v(inner);
  CHECK(v.calls() == 0);
  v.score("c", {"s"});
  v.score("c", {"s", "t"});
  CHECK(v.calls() == 2);
}

namespace {

CandidatePool pool_with_steps(const std::vector<std::string>& step_texts) {
  CandidatePool pool;
  for (size_t i = 0; i < step_texts.size(); ++i) {
    PoolEntry e;
    e.source_beam_index = static_cast<int>(i);
    e.branch_index = 0;
    e.step_text = step_texts[i];
    e.context_text = "ctx";
    pool.entries.push_back(std::move(e));
  }
  return pool;
}

}  // namespace

TEST_CASE("rank_candidates sorts descending with deterministic tie-break") {
  ScriptedVerifier v(0.0);
  v.set_score("a", 0.2);
  v.set_score("b", 0.9);
  v.set_score("c", 0.5);
  CandidatePool pool = pool_with_steps({"a", "b", "c"});
  auto ranked = rank_candidates(pool, v, AggregationRule::last);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].aggregate == 0.9);
  CHECK(ranked[1].aggregate == 0.5);
  CHECK(ranked[2].aggregate == 0.2);

  // Equal scores: lower source beam index first.
  ScriptedVerifier tied(0.7);
  CandidatePool pool2 = pool_with_steps({"x", "y"});
  pool2.entries[0].source_beam_index = 2;
  pool2.entries[1].source_beam_index = 0;
  auto r2 = rank_candidates(pool2, tied, AggregationRule::last);
  CHECK(pool2.entries[r2[0].pool_index].source_beam_index == 0);
  CHECK(pool2.entries[r2[1].pool_index].source_beam_index == 2);
}

TEST_CASE("rank_candidates matches an independent sort oracle and is a permutation") {
  auto rng = seeding::make_rng(5);
  std::vector<std::string> texts;
  std::vector<double> vals;
  ScriptedVerifier v(0.0);
  for (int i = 0; i < 10; ++i) {
    texts.push_back("step" + std::to_string(i));
    vals.push_back(((rng() >> 11) * 0x1.0p-53));
    v.set_score(texts.back(), vals.back());
  }
  CandidatePool pool = pool_with_steps(texts);
  auto ranked = rank_candidates(pool, v, AggregationRule::last);

  std::vector<double> expected = vals;
  std::sort(expected.begin(), expected.end(), std::greater<double>());
  std::vector<size_t> seen;
  for (size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].aggregate == doctest::Approx(expected[i]).epsilon(1e-12));
    seen.push_back(ranked[i].pool_index);
  }
  std::sort(seen.begin(), seen.end());
  for (size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);  // permutation
}

TEST_CASE("rank_candidates uses frozen scores for finished passthroughs") {
  CandidatePool pool;
  PoolEntry e;
  e.passthrough_finished = true;
  e.prior_scores = scores({0.8});
  pool.entries.push_back(e);
  auto inner = std::make_shared<ScriptedVerifier>(0.5);
  CountingVerifier counting(inner);
  auto ranked = rank_candidates(pool, counting, AggregationRule::last);
  CHECK(ranked[0].aggregate == 0.8);
  CHECK(counting.calls() == 0);
}
