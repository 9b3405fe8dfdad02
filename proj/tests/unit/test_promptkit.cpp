#include <doctest.h>

#include <random>

#include "recon/bench/types.hpp"
#include "recon/error.hpp"
#include "recon/promptkit/prompt.hpp"
#include "recon/promptkit/response.hpp"
#include "recon/promptkit/schema.hpp"
#include "support.hpp"

using namespace recon;
using namespace recon::promptkit;
using recon::testing::read_fixture;
using nlohmann::json;

namespace {

struct AesSample {
  cgraph::CallGraph graph{pseudoc::parse_dump_text(read_fixture("aes_sample.jsonl"))};
  cgraph::ContextConfig cfg;
  cgraph::ContextSelection sel;
  std::vector<dflow::TraceReport> traces;

  AesSample() {
    traces.push_back(dflow::trace_variable(graph, "sub_1909", "a1", cfg));
    sel = cgraph::select_context(cgraph::collect_context(graph, "sub_1909", cfg), cfg, traces[0].functions());
  }
};

std::size_t pos(const std::string& text, std::string_view what) { return text.find(what); }

}  // namespace

TEST_CASE("task tags") {
  CHECK(all_families().size() == 14);
  CHECK(TaskSpec::parse("<arg:a1>").tag() == "<arg:a1>");
  CHECK(TaskSpec::parse("summary-brief-cn").family == TaskFamily::SummaryBriefCn);
  CHECK(TaskSpec::parse(" <func-analysis> ").schema_id() == "func-analysis.v1");
  CHECK_THROWS_AS(TaskSpec::parse("<var>"), Error);
  CHECK_THROWS_AS(TaskSpec::parse("<funcname:x>"), Error);
  CHECK_THROWS_AS(TaskSpec::parse("<nope>"), Error);
  for (auto f : all_families()) {
    TaskSpec t;
    t.family = f;
    if (f == TaskFamily::Var || f == TaskFamily::Arg) t.param = "a1";
    CHECK(TaskSpec::parse(t.tag()).tag() == t.tag());
  }
}

TEST_CASE("every task family has a schema and a golden example that validates") {
  AesSample fx;
  const auto* target = fx.graph.function("sub_1909");
  auto clusters = bench::TypeClusterTable::defaults();
  std::set<std::string> used;
  for (auto f : all_families()) {
    TaskSpec t;
    t.family = f;
    if (f == TaskFamily::Var || f == TaskFamily::Arg) t.param = "a2";
    INFO(t.tag());
    auto golden = golden_example(t, f == TaskFamily::Args ? "a1" : "v3");
    CHECK(schema_violations(schema(t.schema_id()), golden).empty());
    Prediction p{t, "", golden, ""};
    auto rep = validate_prediction(p, *target, clusters);
    CHECK(rep.ok);
    used.insert(t.schema_id());
  }
  auto ids = schema_ids();
  CHECK(std::set<std::string>(ids.begin(), ids.end()) == used);
}

TEST_CASE("build_prompt on the AES sample dump") {
  AesSample fx;
  REQUIRE(fx.sel.selected == std::vector<std::string>{"sub_14F7"});
  auto b = build_prompt(fx.graph, fx.sel, fx.traces, TaskSpec::parse("<arg:a1>"), {});
  CHECK(b.part5_task == "<arg:a1>");
  CHECK(b.thinking_tag == "<Thought>");
  auto text = b.text();
  auto c = pos(text, "## Context Functions\n"), ch = pos(text, "## Call Chains\n"), df = pos(text, "## Data Flow\n"),
       tg = pos(text, "## Target Function\n");
  REQUIRE(c != std::string::npos);
  CHECK(c < ch);
  CHECK(ch < df);
  CHECK(df < tg);
  CHECK(text.size() >= 20);
  CHECK(text.substr(text.size() - 20) == "\n<arg:a1>\n<Thought>\n");
  CHECK(text.find("sub_1909 -> sub_14F7") != std::string::npos);
  CHECK(text.find("__int64 __fastcall sub_14F7(__int64 a1, __int64 a2) // a2 ~ alias of a1@sub_1909") <
        text.find("## Call Chains"));
  CHECK(b.part4_dataflow.find("- sub_14F7: a2 ~ alias of a1@sub_1909") != std::string::npos);
  CHECK(b.token_estimate == estimate_tokens(text));
  CHECK(b.token_estimate == static_cast<int>((text.size() + 3) / 4));

  PromptOptions super;
  super.super_thought = true;
  CHECK(build_prompt(fx.graph, fx.sel, fx.traces, TaskSpec::parse("<funcname>"), super).thinking_tag ==
        "<Super-Thought>");
  CHECK(build_prompt(fx.graph, fx.sel, fx.traces, TaskSpec::parse("<arg:a1>"), {}).text() == text);
}

TEST_CASE("budget pressure drops context, then chains, then annotations") {
  AesSample fx;
  auto task = TaskSpec::parse("<vars>");
  auto full = build_prompt(fx.graph, fx.sel, fx.traces, task, {});
  PromptOptions tight;
  tight.budget = 1;
  try {
    build_prompt(fx.graph, fx.sel, fx.traces, task, tight);
    FAIL("expected BudgetTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetTooSmall);
  }

  std::vector<std::string> section_order = {"## Context Functions", "## Call Chains", "## Data Flow",
                                            "## Target Function"};
  int last_stage = 0;
  for (int budget = full.token_estimate; budget > 0; --budget) {
    PromptOptions o;
    o.budget = budget;
    PromptBundle b;
    try {
      b = build_prompt(fx.graph, fx.sel, fx.traces, task, o);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BudgetTooSmall);
      break;
    }
    CHECK(b.token_estimate <= budget);
    auto text = b.text();
    std::size_t prev = 0;
    for (const auto& h : section_order) {
      auto p = text.find(h);
      if (p == std::string::npos) continue;
      CHECK(p >= prev);
      prev = p;
    }
    CHECK(text.find("## Target Function") != std::string::npos);
    int stage = b.dropped_annotations ? 3 : b.dropped_chains ? 2 : !b.dropped_context.empty() ? 1 : 0;
    CHECK(stage >= last_stage);
    if (b.dropped_chains) CHECK(b.part2_context.empty());
    if (b.dropped_annotations) CHECK(b.part3_chains.empty());
    last_stage = stage;
  }
  CHECK(last_stage == 3);
}

TEST_CASE("lowest-ranked context goes first") {
  cgraph::CallGraph g(pseudoc::parse_dump_text(read_fixture("ctx12.jsonl")));
  cgraph::ContextConfig cfg{2, 2, 10, 25};
  auto sel = cgraph::select_context(cgraph::collect_context(g, "sub_2000", cfg), cfg, {});
  auto full = build_prompt(g, sel, {}, TaskSpec::parse("<funcname>"), {});
  PromptOptions o;
  o.budget = full.token_estimate - 1;
  auto b = build_prompt(g, sel, {}, TaskSpec::parse("<funcname>"), o);
  REQUIRE(b.dropped_context.size() == 1);
  CHECK(b.dropped_context[0] == sel.ranked.back());
  auto kept = sel.selected;
  kept.erase(std::find(kept.begin(), kept.end(), sel.ranked.back()));
  CHECK(b.context_names == kept);
}

TEST_CASE("parse_response") {
  auto fn = TaskSpec::parse("<funcname>");
  auto p = parse_response(fn, "…thinking… {\"function_name\": \"aes_cbc_encrypt\"}");
  CHECK(p.payload == json{{"function_name", "aes_cbc_encrypt"}});
  CHECK(p.reasoning == "…thinking…");
  auto two = parse_response(fn, "first {\"function_name\": \"a\"} then ```json\n{\"function_name\": \"b\"}\n```");
  CHECK(two.payload["function_name"] == "b");
  CHECK(two.reasoning == "first {\"function_name\": \"a\"} then");
  auto err = [&](const std::string& text) {
    try {
      parse_response(fn, text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(err("no json here") == ErrorCode::FormatError);
  CHECK(err("{broken") == ErrorCode::FormatError);
  CHECK(err("{\"name\": \"x\"}") == ErrorCode::SchemaError);
  CHECK(err("{\"function_name\": 3}") == ErrorCode::SchemaError);
  auto nested = parse_response(TaskSpec::parse("<vars>"),
                               "x {\"variables\": [{\"old\": \"v3\", \"new_name\": \"p\", \"new_type\": \"int\"}]} {bad}");
  CHECK(nested.payload["variables"][0]["old"] == "v3");
}

TEST_CASE("render/parse round trip on payloads") {
  std::mt19937 rng(7);
  const std::string noise = "ab{}[]\"\\: \n`";
  for (int trial = 0; trial < 200; ++trial) {
    for (auto f : all_families()) {
      TaskSpec t;
      t.family = f;
      if (f == TaskFamily::Var || f == TaskFamily::Arg) t.param = "a1";
      auto payload = golden_example(t, "a1");
      std::string reasoning;
      for (int i = 0; i < static_cast<int>(rng() % 40); ++i) reasoning += noise[rng() % noise.size()];
      auto text = render_response(reasoning, payload, trial % 2 ? "<Super-Thought>" : "<Thought>");
      CHECK(parse_response(t, text).payload == payload);
    }
  }
}

TEST_CASE("validate_prediction") {
  AesSample fx;
  const auto* target = fx.graph.function("sub_1909");
  auto clusters = bench::TypeClusterTable::defaults();
  auto vars = TaskSpec::parse("<vars>");
  auto check = [&](const TaskSpec& t, json payload) {
    return validate_prediction(Prediction{t, "", std::move(payload), ""}, *target, clusters);
  };
  auto one = [](std::string old, std::string name, std::string type) {
    return json{{"variables", json::array({{{"old", old}, {"new_name", name}, {"new_type", type}}})}};
  };
  auto r = check(vars, one("v99", "x", "int"));
  REQUIRE_FALSE(r.ok);
  CHECK(r.violations[0].code == ViolationCode::UnknownVariable);
  r = check(vars, one("v3", "9abc", "int"));
  REQUIRE_FALSE(r.ok);
  CHECK(r.violations[0].code == ViolationCode::FormatError);
  CHECK(check(vars, one("v3", "iv_ptr", "uint8_t *")).ok);
  r = check(vars, one("v3", "iv_ptr", "struct nothing_here *"));
  CHECK(r.violations.at(0).code == ViolationCode::UnknownType);
  r = check(vars, one("v3", "iv_ptr", "int ) *"));
  CHECK(r.violations.at(0).code == ViolationCode::UnknownType);
  auto declared = one("v3", "ctx", "struct AES_ctx *");
  declared["structs"] = json::array({{{"name", "AES_ctx"},
                                       {"members", json::array({{{"name", "RoundKey"}, {"type", "uint8_t[176]"},
                                                                 {"offset", 0}, {"size", 176}},
                                                                {{"name", "Iv"}, {"type", "uint8_t[16]"},
                                                                 {"offset", 176}, {"size", 16}}})}}});
  CHECK(check(vars, declared).ok);
  CHECK(check(TaskSpec::parse("<args>"), one("v3", "x", "int")).violations.at(0).code ==
        ViolationCode::UnknownVariable);
  CHECK(check(TaskSpec::parse("<var:v7>"), one("v3", "x", "int")).violations.at(0).code ==
        ViolationCode::UnknownVariable);
  auto s = check(TaskSpec::parse("<summary-en>"), {{"summary", "   "}});
  CHECK(s.violations.at(0).code == ViolationCode::EmptyField);
  s = check(TaskSpec::parse("<summary-en>"), {{"summary", ""}});
  CHECK(s.violations.at(0).code == ViolationCode::SchemaError);
  auto wrong = check(TaskSpec::parse("<funcname>"), {{"fn", "x"}});
  CHECK(wrong.violations.at(0).code == ViolationCode::SchemaError);
}
