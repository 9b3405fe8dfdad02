#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles/dflow_programs.hpp"
#include "recon/bench/metrics.hpp"
#include "recon/bench/runner.hpp"
#include "recon/bench/types.hpp"
#include "recon/error.hpp"
#include "support.hpp"

using namespace recon;
using namespace recon::bench;
using recon::testing::read_fixture;
using nlohmann::json;

namespace {

StructLayout layout(std::string name, long total, std::vector<StructMember> members) {
  return {std::move(name), total, std::move(members)};
}

std::string snake(const std::vector<std::string>& w) {
  std::string s;
  for (const auto& x : w) s += (s.empty() ? "" : "_") + x;
  return s;
}

std::string camel(const std::vector<std::string>& w, bool pascal) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::string x = w[i];
    if (i > 0 || pascal) x[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(x[0])));
    s += x;
  }
  return s;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("rouge_name hand counts") {
  struct Row {
    const char* pred;
    const char* gt;
    double recall;
  };
  const Row rows[] = {
      {"aes_cbc_encrypt", "AES_CBC_encrypt_buffer", 0.75},
      {"AES_CBC_encrypt_buffer", "AES_CBC_encrypt_buffer", 1.0},
      {"", "KeyExpansion", 0.0},
      {"parseHTTPRequest", "parse_http_request", 1.0},
      {"get_len", "get_length", 0.5},
      {"XorWithIv", "xor_with_iv", 1.0},
      {"sub_1909", "KeyExpansion", 0.0},
      {"key_expand", "KeyExpansion", 0.5},
      {"cipher_block", "Cipher", 1.0},
      {"copy_buffer_buffer", "buffer_copy_buffer_size", 0.75},
      {"init_ctx", "AES_init_ctx_iv", 0.5},
  };
  for (const auto& r : rows) {
    CAPTURE(r.pred);
    CAPTURE(r.gt);
    CHECK(rouge_name(r.pred, r.gt) == doctest::Approx(r.recall));
  }
  auto s = rouge("aes_cbc_encrypt", "AES_CBC_encrypt_buffer");
  CHECK(s.precision == doctest::Approx(1.0));
  CHECK(s.f1 == doctest::Approx(2 * 0.75 / 1.75));
  CHECK(rouge("x", "").recall == 0.0);
}

TEST_CASE("rouge ignores case and word separators") {
  const std::vector<std::string> vocab{"aes", "key", "buffer", "init", "ctx", "round", "xor", "cipher", "len", "iv"};
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    auto words = [&]() {
      std::vector<std::string> w(1 + rng() % 4);
      for (auto& x : w) x = vocab[rng() % vocab.size()];
      return w;
    };
    auto a = words();
    auto b = words();
    double base = rouge_name(snake(a), snake(b));
    CHECK(rouge_name(camel(a, false), upper(snake(b))) == doctest::Approx(base));
    CHECK(rouge_name(camel(a, true), camel(b, false)) == doctest::Approx(base));
    CHECK(rouge_name(upper(snake(a)), snake(a)) == doctest::Approx(1.0));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
  }
}

TEST_CASE("struct_f1 triples") {
  auto ctx = layout("AES_ctx", 192, {{"RoundKey", 0, 176}, {"Iv", 176, 16}});
  auto s = struct_f1(ctx, ctx);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);

  auto split = layout("s", 192, {{"a", 0, 16}, {"b", 16, 160}, {"c", 176, 16}});
  s = struct_f1(split, ctx);
  CHECK(s.precision == doctest::Approx(0.5));
  CHECK(s.recall == doctest::Approx(1.0));
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0));

  auto blob = layout("blob", 192, {{"data", 0, 192}});
  s = struct_f1(blob, ctx);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);

  CHECK(struct_f1(blob, blob).f1 == 1.0);
  CHECK(struct_boundaries(split) == std::vector<long>{16, 176});
}

TEST_CASE("struct layout validation and json") {
  CHECK_THROWS_AS(layout("s", 8, {{"a", 0, 8}, {"b", 4, 4}}).validate(), Error);
  CHECK_THROWS_AS(layout("s", 8, {{"a", 0, 16}}).validate(), Error);
  CHECK_THROWS_AS(layout("s", 8, {{"a", 0, 0}}).validate(), Error);
  auto ctx = layout("AES_ctx", 192, {{"RoundKey", 0, 176}, {"Iv", 176, 16}});
  CHECK_NOTHROW(ctx.validate());
  json j = ctx;
  auto back = j.get<StructLayout>();
  CHECK(back.name == "AES_ctx");
  CHECK(back.members.size() == 2);
  CHECK(back.members[1].offset == 176);
}

TEST_CASE("codebleu agrees with the pinned reference") {
  auto ref = json::parse(read_fixture("codebleu/reference.json"));
  REQUIRE(ref.size() == 10);
  for (const auto& [name, r] : ref.items()) {
    CAPTURE(name);
    auto d = codebleu_detail(read_fixture("codebleu/" + name + "_pred.c"), read_fixture("codebleu/" + name + "_gt.c"));
    const auto& o = r.at("ordered");
    CHECK(std::abs(d.score - o.at("codebleu").get<double>()) <= 0.02);
    CHECK(std::abs(d.ngram - o.at("ngram").get<double>()) <= 0.02);
    CHECK(std::abs(d.weighted_ngram - o.at("weighted_ngram").get<double>()) <= 0.02);
    CHECK(std::abs(d.syntax - o.at("syntax").get<double>()) <= 0.02);
    CHECK(std::abs(d.dataflow - o.at("dataflow").get<double>()) <= 0.02);
    double lo = 1, hi = 0;
    for (const auto& [seed, v] : r.at("by_seed").items()) {
      lo = std::min(lo, v.get<double>());
      hi = std::max(hi, v.get<double>());
    }
    CHECK(d.score >= lo - 0.02);
    CHECK(d.score <= hi + 0.02);
  }
}

TEST_CASE("codebleu identity and disjoint inputs") {
  for (int i = 1; i <= 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "codebleu/p%02d_gt.c", i);
    auto gt = read_fixture(name);
    CHECK(codebleu(gt, gt) == 1.0);
  }
  CHECK(codebleu("x", "x") == 1.0);
  CHECK(codebleu("double beta(){return 7.5;}", "void alpha(char *s)\n{\n  puts(s);\n}") <= 0.05);
}

TEST_CASE("codebleu components stay in [0, 1] on random programs") {
  std::vector<std::string> bodies;
  for (unsigned seed = 1; seed <= 12; ++seed) {
    for (const auto& f : oracle::make_program(seed).dump.functions) bodies.push_back(f.pseudocode);
  }
  std::mt19937 rng(11);
  for (int i = 0; i < 60; ++i) {
    const auto& a = bodies[rng() % bodies.size()];
    const auto& b = bodies[rng() % bodies.size()];
    auto d = codebleu_detail(a, b);
    for (double v : {d.score, d.ngram, d.weighted_ngram, d.syntax, d.dataflow}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(d.score == doctest::Approx((d.ngram + d.weighted_ngram + d.syntax + d.dataflow) / 4));
    CHECK(codebleu(a, a) == 1.0);
  }
}

TEST_CASE("syntax subtrees use the tree-sitter-c vocabulary") {
  auto t = syntax_subtrees("int f(int a)\n{\n  int x = a;\n  if (a > 0)\n    x = a * 2;\n  return -1;\n}\n");
  REQUIRE(!t.empty());
  CHECK(t[0] ==
        "(translation_unit (function_definition type: (primitive_type) declarator: (function_declarator "
        "declarator: (identifier) parameters: (parameter_list (parameter_declaration type: (primitive_type) "
        "declarator: (identifier)))) body: (compound_statement (declaration type: (primitive_type) declarator: "
        "(init_declarator declarator: (identifier) value: (identifier))) (if_statement condition: "
        "(parenthesized_expression (binary_expression left: (identifier) right: (number_literal))) consequence: "
        "(expression_statement (assignment_expression left: (identifier) right: (binary_expression left: "
        "(identifier) right: (number_literal))))) (return_statement (number_literal)))))");
}

TEST_CASE("data-flow edges of a loop") {
  auto edges = dataflow_edges("int f(int a)\n{\n  int x = a;\n  while (x)\n    x = x - a;\n  return x;\n}\n");
  bool computed = false;
  for (const auto& e : edges) {
    if (e.var == "x" && e.relation == "computedFrom") {
      CHECK(e.parents == std::vector<std::string>{"x", "a"});
      computed = true;
    }
    CHECK((e.relation == "comesFrom" || e.relation == "computedFrom"));
  }
  CHECK(computed);
}

TEST_CASE("type_match clusters") {
  auto t = TypeClusterTable::defaults();
  CHECK(type_match("unsigned int", "_DWORD", t));
  CHECK(type_match("uint8_t *", "unsigned char *", t));
  CHECK_FALSE(type_match("int", "__int64", t));
  CHECK_FALSE(type_match("char *", "char", t));
}

namespace {

class FixedAdapter : public Adapter {
 public:
  using Fn = std::function<AdapterOutput(const GroundTruth&, const promptkit::TaskSpec&)>;
  explicit FixedAdapter(Fn fn) : fn_(std::move(fn)) {}
  std::string name() const override { return "fixed"; }
  AdapterOutput predict(const BenchCase& c, const cgraph::CallGraph&, const std::string& function,
                        const promptkit::TaskSpec& task) override {
    for (const auto& t : c.truth) {
      if (t.function == function) return fn_(t, task);
    }
    return {};
  }

 private:
  Fn fn_;
};

// Answers with the ground truth itself.
AdapterOutput echo_truth(const GroundTruth& t, const promptkit::TaskSpec& task) {
  json p;
  using promptkit::TaskFamily;
  switch (task.family) {
    case TaskFamily::FuncName: p = {{"function_name", t.true_name}}; break;
    case TaskFamily::Decompilation: p = {{"code", t.source_code}}; break;
    case TaskFamily::SummaryEn: p = {{"summary", "anything"}}; break;
    default: {
      p["variables"] = json::array();
      for (const auto& v : t.vars) {
        p["variables"].push_back({{"old", v.pseudo_name}, {"new_name", v.true_name}, {"new_type", v.true_type}});
      }
      p["structs"] = json::array();
      for (const auto& s : t.structs) {
        json members = json::array();
        for (const auto& m : s.members) {
          members.push_back({{"name", m.name}, {"type", "uint8_t"}, {"offset", m.offset}, {"size", m.size}});
        }
        p["structs"].push_back({{"name", s.name}, {"members", members}});
      }
    }
  }
  AdapterOutput out;
  out.status = llmgate::RunStatus::Applied;
  out.attempts = 1;
  out.prediction = promptkit::Prediction{task, "", p, p.dump()};
  return out;
}

BenchConfig hand_config() {
  BenchConfig cfg;
  cfg.judge = [](const pseudoc::PseudoFunction&, std::string_view, const GroundTruth&) { return 0.75; };
  return cfg;
}

}  // namespace

TEST_CASE("run_benchmark reproduces the hand-scored table") {
  auto ref = json::parse(read_fixture("codebleu/reference.json"));
  const double dec = ref["p01"]["ordered"]["codebleu"].get<double>();

  struct Expect {
    const char* function;
    const char* task;
    const char* status;
    int attempts;
    std::map<std::string, double> scores;
  };
  // Scored by hand from replay.jsonl against truth.json.
  const std::vector<Expect> table{
      {"sub_1000", "<funcname>", "Applied", 1, {{"func_name", 0.75}}},
      {"sub_1100", "<funcname>", "ExhaustedRetries", 0, {}},
      {"sub_1200", "<funcname>", "Applied", 2, {{"func_name", 1.0}}},
      {"sub_1300", "<vars>", "Applied", 1, {{"var_name", 0.25}, {"var_type", 1.0}}},
      {"sub_1400", "<args>", "Applied", 1, {{"var_name", 0.5}, {"var_type", 0.5}, {"struct", 2.0 / 3.0}}},
      {"sub_1500", "<decompilation>", "Applied", 1, {{"dec", dec}}},
      {"sub_1600", "<summary-en>", "Applied", 1, {{"sum", 0.75}}},
      {"sub_1700", "<funcname>", "ExhaustedRetries", 4, {}},
      {"sub_1800", "<vars>", "ExhaustedRetries", 1, {}},
      {"sub_1900", "<var:v1>", "Applied", 1, {{"var_name", 0.5}, {"var_type", 1.0}}},
  };

  ReplayAdapter replay;
  auto report = run_benchmark(recon::testing::fixture_path("bench/hand10"), replay, hand_config());
  REQUIRE(report.rows.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = report.rows[i];
    CAPTURE(row.function);
    CHECK(row.function == table[i].function);
    CHECK(row.task == table[i].task);
    CHECK(row.status == table[i].status);
    CHECK(row.attempts == table[i].attempts);
    REQUIRE(row.scores.size() == table[i].scores.size());
    for (const auto& [k, v] : table[i].scores) {
      CAPTURE(k);
      REQUIRE(row.scores.count(k));
      CHECK(row.scores.at(k) == doctest::Approx(v).epsilon(1e-6));
    }
  }
  CHECK(report.success_ratio == doctest::Approx(0.7));
  CHECK(report.runs == 10);
  CHECK(report.applied == 7);
  CHECK(report.aggregates.at("func_name") == doctest::Approx(87.5));
  CHECK(report.aggregates.at("var_name") == doctest::Approx(125.0 / 3));
  CHECK(report.aggregates.at("var_type") == doctest::Approx(250.0 / 3));
  CHECK(report.aggregates.at("struct") == doctest::Approx(200.0 / 3));
  CHECK(report.aggregates.at("dec") == doctest::Approx(100 * dec).epsilon(1e-6));
  CHECK(report.aggregates.at("sum") == doctest::Approx(75.0));
  CHECK(report.rows[7].detail.find("FormatError") == 0);
  CHECK(report.rows[8].detail.find("UnknownVariable") == 0);

  // Aggregates come back from the persisted rows alone.
  auto back = EvalReport::from_json(json::parse(report.to_json().dump()));
  CHECK(back.aggregates == report.aggregates);
  CHECK(back.success_ratio == report.success_ratio);
  CHECK(back.to_json()["rows"] == report.to_json()["rows"]);
}

TEST_CASE("ground truth echoed back scores 1 everywhere") {
  auto cases = load_dataset(recon::testing::fixture_path("bench/hand10"));
  FixedAdapter echo(echo_truth);
  auto cfg = hand_config();
  cfg.judge = [](const pseudoc::PseudoFunction&, std::string_view, const GroundTruth&) { return 1.0; };
  auto report = run_benchmark(cases, echo, cfg);
  CHECK(report.success_ratio == 1.0);
  REQUIRE(report.aggregates.size() == 6);
  for (const auto& [k, v] : report.aggregates) {
    CAPTURE(k);
    CHECK(v == doctest::Approx(100.0));
  }
}

TEST_CASE("an adapter that never formats gives an empty report") {
  auto cases = load_dataset(recon::testing::fixture_path("bench/hand10"));
  FixedAdapter fail([](const GroundTruth&, const promptkit::TaskSpec&) {
    AdapterOutput out;
    out.attempts = 4;
    out.detail = "FormatError: no JSON object";
    return out;
  });
  auto report = run_benchmark(cases, fail, hand_config());
  CHECK(report.runs == 10);
  CHECK(report.success_ratio == 0.0);
  CHECK(report.aggregates.empty());
}

TEST_CASE("report aggregates recompute from random rows") {
  std::mt19937 rng(3);
  for (int round = 0; round < 50; ++round) {
    EvalReport r;
    std::map<std::string, std::pair<double, int>> sums;
    int applied = 0;
    int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      EvalRow row;
      row.function = "f" + std::to_string(i);
      row.task = "<funcname>";
      bool ok = rng() % 3 != 0;
      row.status = ok ? "Applied" : "ExhaustedRetries";
      if (ok) {
        ++applied;
        for (const char* k : kMetrics) {
          if (rng() % 2) continue;
          double v = static_cast<double>(rng() % 1001) / 1000.0;
          row.scores[k] = v;
          sums[k].first += v;
          sums[k].second += 1;
        }
      }
      r.rows.push_back(row);
    }
    r.recompute();
    CHECK(r.success_ratio == doctest::Approx(static_cast<double>(applied) / n));
    CHECK(r.aggregates.size() == sums.size());
    for (const auto& [k, s] : sums) CHECK(r.aggregates.at(k) == doctest::Approx(100 * s.first / s.second));
    auto back = EvalReport::from_json(json::parse(r.to_json().dump()));
    CHECK(back.aggregates == r.aggregates);
  }
}

TEST_CASE("dataset errors") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / ("recon_bench_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  fs::copy_file(recon::testing::fixture_path("bench/hand10/dump.jsonl"), dir / "dump.jsonl");
  CHECK_THROWS_WITH_AS(load_case(dir), doctest::Contains("ground truth"), Error);
  {
    std::ofstream(dir / "truth.json") << R"({"functions": [{"function": "sub_1300", "true_name": "x",
      "vars": [{"pseudo_name": "v7", "true_name": "y", "true_type": "int"}]}]})";
  }
  try {
    load_case(dir);
    FAIL("expected DatasetError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DatasetError);
  }
  {
    std::ofstream(dir / "truth.json") << R"({"functions": [{"function": "nope", "true_name": "x"}]})";
  }
  CHECK_THROWS_AS(load_case(dir), Error);
  CHECK_THROWS_AS(load_dataset(dir / "missing"), Error);
  fs::remove_all(dir);
}

TEST_CASE("struct_f1 symmetry on random layouts") {
  std::mt19937 rng(5);
  auto random_layout = [&]() {
    StructLayout l{"s", 256, {}};
    long off = 0;
    while (off < 256) {
      long size = 1 + static_cast<long>(rng() % 40);
      if (off + size > 256) size = 256 - off;
      if (rng() % 3) l.members.push_back({"m" + std::to_string(off), off, size});
      off += size;
    }
    return l;
  };
  for (int i = 0; i < 300; ++i) {
    auto a = random_layout();
    auto b = random_layout();
    auto ab = struct_f1(a, b);
    auto ba = struct_f1(b, a);
    CHECK(ab.f1 == doctest::Approx(ba.f1));
    CHECK(ab.precision == doctest::Approx(ba.recall));
    CHECK(ab.recall == doctest::Approx(ba.precision));
  }
}

TEST_CASE("type_match is an equivalence on parseable types") {
  const std::vector<std::string> types{"int",      "unsigned int", "_DWORD",   "__int64", "unsigned __int64", "size_t",
                                       "char",     "const char",   "_BYTE",    "char *",  "const char *",     "void *",
                                       "_QWORD *", "char **",      "double",   "float",   "short",            "_WORD",
                                       "bool",     "long long",    "uint8_t *"};
  auto t = TypeClusterTable::defaults();
  for (const auto& a : types) {
    CHECK(type_match(a, a, t));
    for (const auto& b : types) {
      CHECK(type_match(a, b, t) == type_match(b, a, t));
      for (const auto& c : types) {
        if (type_match(a, b, t) && type_match(b, c, t)) CHECK(type_match(a, c, t));
      }
    }
  }
  CHECK(type_match("__int64", "unsigned __int64", t));
  CHECK(type_match("const char *", "char *", t));
  CHECK_FALSE(type_match("int", "char", t));
}
