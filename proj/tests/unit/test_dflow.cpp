#include <doctest.h>

#include <map>
#include <set>

#include "oracles/dflow_oracle.hpp"
#include "oracles/dflow_programs.hpp"
#include "recon/dflow/alias.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/error.hpp"
#include "support.hpp"

using namespace recon;
using recon::testing::read_fixture;

namespace {

pseudoc::DecompDump dump_of(const std::vector<std::pair<std::string, std::string>>& fns) {
  pseudoc::DecompDump d;
  d.project_name = "t";
  std::uint64_t addr = 0x100;
  for (const auto& [name, code] : fns) {
    pseudoc::FunctionRecord r;
    r.name = name;
    r.address = addr++;
    r.pseudocode = code;
    d.functions.push_back(r);
  }
  return d;
}

std::set<oracle::OracleUsage> usage_set(const dflow::TraceReport& r) {
  std::set<oracle::OracleUsage> out;
  for (const auto& u : r.usages) out.insert({u.function, u.line, u.variable, std::string(dflow::to_string(u.rule))});
  return out;
}

}  // namespace

TEST_CASE("a1 reaches sub_14F7's second parameter") {
  cgraph::CallGraph g(pseudoc::parse_dump_text(read_fixture("aes_sample.jsonl")));
  auto r = dflow::trace_variable(g, "sub_1909", "a1", {});
  REQUIRE(r.aliases.count({"sub_14F7", "a2"}));
  CHECK(r.aliases.at({"sub_14F7", "a2"}) == std::vector<std::string>{"a1@sub_1909"});
  CHECK(r.aliases.at({"sub_1909", "a1"}).front() == "a1@sub_1909");
  bool logged_v3 = false;
  for (const auto& u : r.usages) {
    if (u.function == "sub_1909" && u.statement_text == "v3 = (_OWORD *)(a1 + 176);") logged_v3 = true;
  }
  CHECK(logged_v3);
  const auto* callee = g.function("sub_14F7");
  auto text = dflow::annotate({callee}, r).at("sub_14F7");
  CHECK(text.substr(0, text.find('\n')) ==
        "__int64 __fastcall sub_14F7(__int64 a1, __int64 a2) // a2 ~ alias of a1@sub_1909");
  CHECK(r.visit_order == std::vector<std::string>{"sub_1909", "sub_14F7"});
}

TEST_CASE("identity assignment propagates") {
  cgraph::CallGraph g(dump_of({{"f", "void f(int x)\n{\n  int y;\n  y = x;\n}"}}));
  auto r = dflow::trace_variable(g, "f", "x", {});
  CHECK(r.aliases.at({"f", "y"}).front() == "x@f");
  REQUIRE(r.usages.size() == 2);
  CHECK(r.usages[0].rule == dflow::Rule::Def);
  CHECK(r.usages[0].line == 1);
  CHECK(r.usages[1].rule == dflow::Rule::AssignLR);
  CHECK(r.usages[1].line == 4);
}

TEST_CASE("refine_expr through an add expression argument") {
  cgraph::CallGraph g(dump_of({
      {"f", "void f(char *buf, int i)\n{\n  g(buf + i);\n}\n"},
      {"g", "void g(char *p)\n{\n  *p = 0;\n}\n"},
  }));
  auto r = dflow::trace_variable(g, "f", "buf", {});
  CHECK(r.aliases.at({"g", "p"}).front() == "buf@f + i");
  auto annotated = dflow::annotate({g.function("g")}, r).at("g");
  CHECK(annotated.find("void g(char *p) // p ~ alias of buf@f + i") == 0);
}

TEST_CASE("errors") {
  cgraph::CallGraph g(dump_of({{"f", "void f(int x){ }"}}));
  CHECK_THROWS_AS(dflow::trace_variable(g, "nope", "x", {}), Error);
  try {
    dflow::trace_variable(g, "f", "zz", {});
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariable);
  }
}

TEST_CASE("annotate: empty report leaves text unchanged, two usages share one comment") {
  cgraph::CallGraph g(dump_of({{"f", "int f(int a, int b)\n{\n  int c;\n\n  c = a;\n  return c + a;\n}\n"}}));
  auto r = dflow::trace_variable(g, "f", "a", {});
  dflow::TraceReport empty;
  CHECK(dflow::annotate({g.function("f")}, empty).at("f") == g.function("f")->source());
  auto text = dflow::annotate({g.function("f")}, r).at("f");
  CHECK(text.find("  return c + a; // a ~ alias of a@f, c ~ alias of a@f\n") != std::string::npos);
}

TEST_CASE("alias shapes") {
  using dflow::Shape;
  dflow::SimpleForm deref{Shape::Deref, "p", ""};
  dflow::SimpleForm addr{Shape::AddrOf, "p", ""};
  dflow::SimpleForm arrow{Shape::Arrow, "p", "next"};
  dflow::SimpleForm index{Shape::Index, "p", "i"};
  CHECK(dflow::apply_shape(deref, "a@f") == "*a@f");
  CHECK(dflow::apply_shape(deref, "&a@f") == "a@f");
  CHECK(dflow::apply_shape(addr, "*(a@f + 4)") == "a@f + 4");
  CHECK(dflow::apply_shape(deref, "a@f + 4") == "*(a@f + 4)");
  CHECK(dflow::apply_shape(arrow, "*a@f") == "(*a@f)->next");
  CHECK(dflow::apply_shape(index, "a@f") == "a@f[i]");
  CHECK(*dflow::invert_shape(deref, "a@f") == "&a@f");
  CHECK_FALSE(dflow::invert_shape(arrow, "a@f").has_value());
  CHECK(dflow::count_origins("(*buf@f + 4)->next") == 1);
}

TEST_CASE("backward pass reaches callers but not their callees") {
  cgraph::CallGraph g(dump_of({
      {"top", "void top(int *q)\n{\n  int *w;\n\n  mid(q);\n  w = q;\n  leaf(w);\n}\n"},
      {"mid", "void mid(int *p)\n{\n  *p = 1;\n}\n"},
      {"leaf", "void leaf(int *z)\n{\n  *z = 2;\n}\n"},
  }));
  auto r = dflow::trace_variable(g, "mid", "p", {});
  CHECK(r.aliases.at({"top", "q"}).front() == "p@mid");
  CHECK(r.aliases.at({"top", "w"}).front() == "p@mid");
  CHECK_FALSE(r.aliases.count({"leaf", "z"}));
}

TEST_CASE("tracer agrees with the brute-force oracle on synthetic programs") {
  std::map<std::string, int> rules;
  for (unsigned seed = 1; seed <= 60; ++seed) {
    auto prog = oracle::make_program(seed);
    cgraph::CallGraph g(prog.dump);
    cgraph::ContextConfig cfg;
    cfg.depth_callee = prog.depth_callee;
    cfg.depth_caller = prog.depth_caller;
    auto r = dflow::trace_variable(g, prog.target, prog.variable, cfg);
    auto o = oracle::brute_force_trace(g, prog.target, prog.variable, cfg.depth_callee, cfg.depth_caller);
    INFO("seed " << seed);
    std::map<std::pair<std::string, std::string>, std::string> primary;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> all;
    for (const auto& [ref, list] : r.aliases) {
      primary[{ref.function, ref.variable}] = list.front();
      all[{ref.function, ref.variable}] = {list.begin(), list.end()};
      for (const auto& a : list) CHECK(dflow::count_origins(a) == 1);
    }
    CHECK(primary == o.primary);
    CHECK(all == o.all_aliases);
    CHECK(usage_set(r) == o.usages);
    for (const auto& u : r.usages) ++rules[std::string(dflow::to_string(u.rule))];
  }
  for (auto rule : {"Def", "Expr", "AssignLR", "AssignRL", "CalleeSimple", "CalleeExpr", "Caller"}) {
    INFO(rule);
    CHECK(rules[rule] >= 3);
  }
}

TEST_CASE("monotonic in depth") {
  for (unsigned seed = 100; seed < 130; ++seed) {
    auto prog = oracle::make_program(seed);
    cgraph::CallGraph g(prog.dump);
    std::set<std::tuple<std::string, int, std::string>> prev;
    for (int d = 0; d <= 3; ++d) {
      cgraph::ContextConfig cfg;
      cfg.depth_callee = cfg.depth_caller = d;
      auto r = dflow::trace_variable(g, prog.target, prog.variable, cfg);
      std::set<std::tuple<std::string, int, std::string>> keys;
      for (const auto& u : r.usages) keys.insert({u.function, u.line, u.variable});
      for (const auto& k : prev) CHECK(keys.count(k));
      prev = keys;
    }
  }
}

TEST_CASE("trace_all covers every declared variable") {
  cgraph::CallGraph g(pseudoc::parse_dump_text(read_fixture("aes_sample.jsonl")));
  auto reports = dflow::trace_all(g, "sub_1909", {});
  CHECK(reports.size() == 8);
  cgraph::CallGraph empty(dump_of({{"f", "void f(){}"}}));
  CHECK(dflow::trace_all(empty, "f", {}).empty());
}
