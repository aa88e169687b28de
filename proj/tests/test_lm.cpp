#include "doctest.h"

#include "egb/scripted_model.hpp"
#include "egb/seeding.hpp"

using namespace egb;

namespace {

// "x = 2.\n" emitted one character-ish token at a time.
ScriptedModel equation_model() {
  ScriptedModel m;
  for (const char* t : {"x", " = ", "2", ".\n", "<eos>", "Q: "}) m.add_token(t);
  m.set_row_text("Q: ", {{"x", 1.0}});
  m.set_row_text("Q: x", {{" = ", 1.0}});
  m.set_row_text("Q: x = ", {{"2", 1.0}});
  m.set_row_text("Q: x = 2", {{".\n", 1.0}});
  m.set_row_text("Q: x = 2.\n", {{"<eos>", 1.0}});
  return m;
}

}  // namespace

TEST_CASE("model context stays token/text consistent") {
  ScriptedModel m = equation_model();
  ModelContext ctx = ModelContext::from_text(m, "Q: x = 2");
  CHECK(ctx.text == "Q: x = 2");
  CHECK(ctx.token_ids == m.tokenize("Q: x = 2"));
  ctx.append_token(m, m.token_id(".\n"));
  CHECK(ctx.text == "Q: x = 2.\n");
  ctx.truncate(m, 2);
  CHECK(ctx.text == "Q: x");
}

TEST_CASE("generate_step stops at a delimiter and does not mutate ctx") {
  ScriptedModel m = equation_model();
  ModelContext ctx = ModelContext::from_text(m, "Q: ");
  StepBoundaryRule rule;
  auto rng = seeding::make_rng(1);
  StepGeneration g = generate_step(m, ctx, rule, {1.0, false}, rng);
  CHECK(g.stop_reason == StopReason::delimiter);
  CHECK(m.detokenize(g.tokens) == "x = 2.\n");
  CHECK(g.events.size() == g.tokens.size());
  for (size_t i = 0; i < g.events.size(); ++i) {
    CHECK(g.events[i].position == static_cast<int>(i));
    CHECK_NOTHROW(g.events[i].distribution.validate());
  }
  CHECK(ctx.text == "Q: ");  // untouched
}

TEST_CASE("generate_step enforces the token cap") {
  ScriptedModel m;
  m.add_token("a");
  m.set_default_row({{m.token_id("a"), 1.0}});
  ModelContext ctx = ModelContext::from_text(m, "a");
  StepBoundaryRule rule;
  rule.max_step_tokens = 3;
  auto rng = seeding::make_rng(1);
  StepGeneration g = generate_step(m, ctx, rule, {1.0, false}, rng);
  CHECK(g.tokens.size() == 3);
  CHECK(g.stop_reason == StopReason::max_tokens);
}

TEST_CASE("generate_step is deterministic under a fixed seed") {
  ScriptedModel m;
  for (const char* t : {"a", "b", ".\n", "S"}) m.add_token(t);
  m.set_default_row({{m.token_id("a"), 0.4}, {m.token_id("b"), 0.4}, {m.token_id(".\n"), 0.2}});
  ModelContext ctx = ModelContext::from_text(m, "S");
  StepBoundaryRule rule;
  auto r1 = seeding::make_rng(77);
  auto r2 = seeding::make_rng(77);
  StepGeneration g1 = generate_step(m, ctx, rule, {1.0, false}, r1);
  StepGeneration g2 = generate_step(m, ctx, rule, {1.0, false}, r2);
  CHECK(g1.tokens == g2.tokens);
  REQUIRE(g1.events.size() == g2.events.size());
  for (size_t i = 0; i < g1.events.size(); ++i)
    CHECK(g1.events[i].distribution == g2.events[i].distribution);
}

TEST_CASE("terminal markers finish the step and pre-terminated contexts emit nothing") {
  ScriptedModel m = equation_model();
  StepBoundaryRule rule;
  auto rng = seeding::make_rng(1);
  ModelContext done = ModelContext::from_text(m, "Q: x = 2.\n");
  StepGeneration g = generate_step(m, done, rule, {1.0, false}, rng);
  CHECK(g.stop_reason == StopReason::terminal);
  CHECK(m.detokenize(g.tokens) == "<eos>");

  ModelContext after = done;
  after.append_token(m, m.token_id("<eos>"));
  StepGeneration g2 = generate_step(m, after, rule, {1.0, false}, rng);
  CHECK(g2.tokens.empty());
  CHECK(g2.stop_reason == StopReason::terminal);
}

TEST_CASE("preamble tokens count toward stop conditions and positions") {
  ScriptedModel m = equation_model();
  ModelContext ctx = ModelContext::from_text(m, "Q: ");
  StepBoundaryRule rule;
  auto rng = seeding::make_rng(1);
  const std::vector<TokenId> pre = {m.token_id("x"), m.token_id(" = ")};
  StepGeneration g = generate_step(m, ctx, rule, {1.0, false}, rng, pre);
  CHECK(m.detokenize(g.tokens) == "2.\n");
  REQUIRE(g.events.size() == 2);
  CHECK(g.events[0].position == 2);  // offset past the preamble
  CHECK(g.events[1].position == 3);

  // A preamble that itself ends with a delimiter closes the step immediately.
  ModelContext ctx2 = ModelContext::from_text(m, "Q: x = 2");
  const std::vector<TokenId> closing = {m.token_id(".\n")};
  StepGeneration g2 = generate_step(m, ctx2, rule, {1.0, false}, rng, closing);
  CHECK(g2.tokens.empty());
  CHECK(g2.stop_reason == StopReason::delimiter);
}

TEST_CASE("gated generation stops at the first entropy exceedance without emitting") {
  ScriptedModel m;
  for (const char* t : {"S", "a", "b", "c", ".\n"}) m.add_token(t);
  m.set_row_text("S", {{"a", 1.0}});
  m.set_row_text("Sa", {{"b", 0.5}, {"c", 0.5}});  // 1 bit, the gate trigger
  ModelContext ctx = ModelContext::from_text(m, "S");
  StepBoundaryRule rule;
  auto rng = seeding::make_rng(3);
  GatedStepGeneration g = generate_step_gated(m, ctx, rule, {1.0, false}, rng, 0.5);
  REQUIRE(g.exceeded_at.has_value());
  CHECK(*g.exceeded_at == 1);
  CHECK(g.tokens.size() == 1);  // only the certain prefix
  CHECK(m.detokenize(g.tokens) == "a");
  REQUIRE(g.trigger.has_value());
  CHECK(prob::entropy(*g.trigger) == doctest::Approx(1.0));

  // Above the threshold nothing triggers and the step runs to its boundary.
  m.set_row_text("Sab", {{".\n", 1.0}});
  m.set_row_text("Sac", {{".\n", 1.0}});
  auto rng2 = seeding::make_rng(3);
  GatedStepGeneration g2 = generate_step_gated(m, ctx, rule, {1.0, false}, rng2, 1.5);
  CHECK(!g2.exceeded_at.has_value());
  CHECK(g2.stop_reason == StopReason::delimiter);
}

TEST_CASE("step boundary rule validation") {
  StepBoundaryRule rule;
  rule.delimiters.clear();
  CHECK_THROWS_AS(rule.validate(), ParameterError);
  rule.delimiters = {".\n"};
  rule.max_step_tokens = 0;
  CHECK_THROWS_AS(rule.validate(), ParameterError);
}
