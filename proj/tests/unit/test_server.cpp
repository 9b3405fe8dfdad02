#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <future>
#include <random>
#include <set>

#include "recon/cgraph/context.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/error.hpp"
#include "recon/promptkit/response.hpp"
#include "recon/server/service.hpp"
#include "support.hpp"

using namespace recon;
using namespace recon::server;
using nlohmann::json;
using recon::testing::fixture_path;
using recon::testing::read_fixture;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static std::atomic<int> n{0};
  auto dir = fs::temp_directory_path() / ("recon_server_" + tag + "_" + std::to_string(::getpid()) + "_" +
                                          std::to_string(n++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string task_tag(const std::vector<llmgate::Message>& msgs) {
  const auto& text = msgs.back().content;
  for (const char* t : {"<funcname>", "<vars>", "<args>", "<summary-en>"})
    if (text.find(t) != std::string::npos) return t;
  return "";
}

std::string target_of(const std::vector<llmgate::Message>& msgs) {
  const auto& text = msgs.back().content;
  auto head = text.rfind("## Target Function");
  for (const char* f : {"sub_1909", "sub_14F7"})
    if (text.find(std::string(" ") + f + "(", head) != std::string::npos) return f;
  return "";
}

// Answers the AES sample the way an analyst would.
llmgate::Completion analyst(const std::vector<llmgate::Message>& msgs) {
  auto tag = task_tag(msgs);
  auto target = target_of(msgs);
  json payload;
  if (tag == "<funcname>") {
    payload = {{"function_name", target == "sub_14F7" ? "Cipher" : "AES_CBC_encrypt_buffer"}};
  } else if (tag == "<vars>" && target == "sub_1909") {
    payload = {{"variables", {{{"old", "v3"}, {"new_name", "iv_ptr"}, {"new_type", "uint8_t *"}}}}};
  } else if (tag == "<args>" && target == "sub_1909") {
    payload = {{"variables", {{{"old", "a1"}, {"new_name", "ctx"}, {"new_type", "struct AES_ctx *"}}}},
               {"structs",
                {{{"name", "AES_ctx"},
                  {"members",
                   {{{"name", "RoundKey"}, {"type", "uint8_t[176]"}, {"offset", 0}, {"size", 176}},
                    {{"name", "Iv"}, {"type", "uint8_t[16]"}, {"offset", 176}, {"size", 16}}}}}}}};
  } else {
    payload = {{"summary", "Encrypts a buffer."}};
  }
  return {promptkit::render_response("The target works on 16 byte blocks.", payload), {}};
}

// Renames v3 only, keeping its type.
llmgate::Completion iv_only(const std::vector<llmgate::Message>&) {
  json payload = {{"variables", {{{"old", "v3"}, {"new_name", "iv_ptr"}, {"new_type", "_OWORD *"}}}}};
  return {promptkit::render_response("v3 walks the previous ciphertext block.", payload), {}};
}

struct Gate {
  std::mutex mu;
  std::condition_variable cv;
  bool open = false;
  void release() {
    {
      std::lock_guard lk(mu);
      open = true;
    }
    cv.notify_all();
  }
  void wait() {
    std::unique_lock lk(mu);
    cv.wait(lk, [&] { return open; });
  }
};

std::shared_ptr<llmgate::LlmClient> client_for(std::shared_ptr<llmgate::Transport> t) {
  llmgate::LlmConfig cfg;
  return std::make_shared<llmgate::LlmClient>(cfg, std::move(t), [](double) {});
}

ServiceOptions options(const fs::path& dir, std::shared_ptr<Gate> gate = std::make_shared<Gate>()) {
  ServiceOptions o;
  o.data_dir = dir;
  o.workers = 4;
  o.resolver = [gate](const std::string& model) -> std::shared_ptr<llmgate::LlmClient> {
    if (model == "analyst") return client_for(std::make_shared<llmgate::FunctionTransport>(analyst));
    if (model == "iv") return client_for(std::make_shared<llmgate::FunctionTransport>(iv_only));
    if (model == "bad")
      return client_for(std::make_shared<llmgate::MockModelTransport>(4));
    if (model == "slow")
      return client_for(std::make_shared<llmgate::MockModelTransport>(0, 2));
    if (model == "gate")
      return client_for(std::make_shared<llmgate::FunctionTransport>([gate](const auto& msgs) {
                          gate->wait();
                          return analyst(msgs);
                        }));
    return nullptr;
  };
  return o;
}

struct Fixture {
  fs::path dir;
  std::shared_ptr<Gate> gate = std::make_shared<Gate>();
  std::unique_ptr<Service> svc;
  std::unique_ptr<HttpServer> http;
  std::unique_ptr<httplib::Client> cli;

  explicit Fixture(const std::string& tag) : dir(fresh_dir(tag)) { boot(); }
  ~Fixture() {
    gate->release();
    shutdown();
    fs::remove_all(dir);
  }
  void boot() {
    svc = std::make_unique<Service>(options(dir, gate));
    http = std::make_unique<HttpServer>(*svc);
    int port = http->start();
    cli = std::make_unique<httplib::Client>("127.0.0.1", port);
    cli->set_read_timeout(30, 0);
  }
  void shutdown() {
    cli.reset();
    if (http) http->stop();
    http.reset();
    svc.reset();
  }

  std::pair<int, json> get(const std::string& path) {
    auto r = cli->Get(path);
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> post(const std::string& path, const std::string& body, const char* type = "application/json") {
    auto r = cli->Post(path, body, type);
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
  }
  std::string project(const std::string& fixture) {
    auto [st, body] = post("/projects", read_fixture(fixture), "application/x-ndjson");
    REQUIRE(st == 201);
    return body["id"];
  }
  json run(const std::string& pid, const std::string& fn, const std::string& task, const std::string& model) {
    auto [st, body] = post("/projects/" + pid + "/functions/" + fn + "/runs", json{{"task", task}, {"model", model}}.dump());
    REQUIRE(st == 202);
    return svc->wait_terminal(body["id"]);
  }
};

}  // namespace

TEST_CASE("server: create project and list functions") {
  Fixture f("create");
  auto [st, body] = f.post("/projects", read_fixture("aes_single.jsonl"), "application/x-ndjson");
  REQUIRE(st == 201);
  CHECK(body["schema"] == kProjectSchema);
  CHECK(body["function_count"] == 1);
  auto [st2, fns] = f.get("/projects/" + body["id"].get<std::string>() + "/functions");
  CHECK(st2 == 200);
  CHECK(fns["schema"] == kFunctionsSchema);
  REQUIRE(fns["functions"].size() == 1);
  CHECK(fns["functions"][0]["name"] == "sub_1909");

  auto [st3, again] = f.post("/projects", read_fixture("aes_single.jsonl"));
  CHECK(st3 == 201);
  CHECK(again["id"] != body["id"]);

  auto [st4, empty] = f.post("/projects", "");
  CHECK(st4 == 400);
  CHECK(empty["schema"] == kErrorSchema);
  CHECK(empty["error"] == "EmptyDump");

  auto [st5, junk] = f.post("/projects", "{\"name\": 1}\nnot json\n");
  CHECK(st5 == 400);
  CHECK(junk["error"] == "EmptyDump");
  CHECK(junk["message"].get<std::string>().find("line 1") != std::string::npos);

  // partial dumps list the rejected lines
  auto [st6, partial] = f.post("/projects", read_fixture("aes_single.jsonl") + "garbage\n");
  CHECK(st6 == 201);
  REQUIRE(partial["rejects"].size() == 1);
  CHECK(partial["rejects"][0]["line"] == 2);

  CHECK(f.get("/projects/p_nope").first == 404);
  CHECK(f.get("/projects/" + body["id"].get<std::string>() + "/functions/nope").first == 404);
}

TEST_CASE("server: context preview") {
  Fixture f("ctx");
  auto pid = f.project("ctx12.jsonl");
  auto [st, d] = f.get("/projects/" + pid + "/functions/sub_2000/context");
  REQUIRE(st == 200);
  CHECK(d["schema"] == kContextSchema);
  CHECK(d["selection"]["selected"].size() <= 10);
  CHECK(d["config"]["k"] == 10);
  CHECK(d["annotated"].contains("sub_2000"));

  auto [st0, zero] = f.get("/projects/" + pid + "/functions/sub_2000/context?depth=0");
  REQUIRE(st0 == 200);
  CHECK(zero["selection"]["selected"].empty());
  CHECK(zero["annotated"].size() == 1);

  auto [st1, one] = f.get("/projects/" + pid + "/functions/sub_2000/context?depth=2&k=1");
  REQUIRE(st1 == 200);
  CHECK(one["selection"]["selected"] == json::array({"sub_2300"}));

  CHECK(f.get("/projects/" + pid + "/functions/sub_2000/context?k=x").first == 400);
  auto [st404, nf] = f.get("/projects/" + pid + "/functions/missing/context");
  CHECK(st404 == 404);
  CHECK(nf["error"] == "UnknownFunction");
}

TEST_CASE("server: runs reach a terminal state") {
  Fixture f("runs");
  auto pid = f.project("aes_sample.jsonl");
  SUBCASE("mock model applies") {
    auto [st, body] = f.post("/projects/" + pid + "/functions/sub_1909/runs", R"({"task": "<funcname>", "model": "mock"})");
    REQUIRE(st == 202);
    CHECK(body["schema"] == kRunSchema);
    auto done = f.svc->wait_terminal(body["id"]);
    CHECK(done["state"] == "Applied");
    CHECK(done["result"]["final"]["payload"].contains("function_name"));
    auto [st2, polled] = f.get("/runs/" + body["id"].get<std::string>());
    CHECK(st2 == 200);
    CHECK(polled["state"] == "Applied");
    CHECK(polled["items"].size() == 1);
  }
  SUBCASE("four bad answers exhaust the retries") {
    auto done = f.run(pid, "sub_1909", "<funcname>", "bad");
    CHECK(done["state"] == "ExhaustedRetries");
    CHECK(done["result"]["attempts"].size() == 4);
    CHECK(done["items"].empty());
  }
  SUBCASE("request errors") {
    CHECK(f.post("/projects/" + pid + "/functions/nope/runs", R"({"task": "<funcname>"})").first == 404);
    CHECK(f.post("/projects/" + pid + "/functions/sub_1909/runs", R"({"task": "<nonsense>"})").first == 400);
    CHECK(f.post("/projects/" + pid + "/functions/sub_1909/runs", R"({"task": "<var:zz>"})").first == 400);
    CHECK(f.post("/projects/" + pid + "/functions/sub_1909/runs", R"({"task": "<funcname>", "model": "none"})").first ==
          400);
    CHECK(f.post("/projects/" + pid + "/functions/sub_1909/runs", "{").first == 400);
    CHECK(f.get("/runs/r_missing").first == 404);
  }
}

TEST_CASE("server: duplicate in-flight run is refused") {
  Fixture f("dup");
  auto pid = f.project("aes_sample.jsonl");
  const std::string path = "/projects/" + pid + "/functions/sub_1909/runs";
  auto [st, first] = f.post(path, R"({"task": "<funcname>", "model": "gate"})");
  REQUIRE(st == 202);
  auto [st2, dup] = f.post(path, R"({"task": "funcname", "model": "gate"})");
  CHECK(st2 == 409);
  CHECK(dup["error"] == "DuplicateRun");
  // other task or function is fine
  CHECK(f.post(path, R"({"task": "<vars>", "model": "analyst"})").first == 202);
  CHECK(f.post("/projects/" + pid + "/functions/sub_14F7/runs", R"({"task": "<funcname>", "model": "analyst"})").first ==
        202);
  f.gate->release();
  CHECK(f.svc->wait_terminal(first["id"])["state"] == "Applied");
  CHECK(f.post(path, R"({"task": "<funcname>", "model": "gate"})").first == 202);
}

TEST_CASE("server: reasoning streams as a growing prefix") {
  Fixture f("stream");
  auto pid = f.project("aes_sample.jsonl");
  auto [st, body] = f.post("/projects/" + pid + "/functions/sub_1909/runs", R"({"task": "<vars>", "model": "slow"})");
  REQUIRE(st == 202);
  std::string id = body["id"];

  std::string seen;
  int growths = 0;
  for (int i = 0; i < 5000; ++i) {
    auto [s, r] = f.get("/runs/" + id);
    REQUIRE(s == 200);
    std::string now = r["reasoning"];
    CHECK(now.compare(0, seen.size(), seen) == 0);
    if (now.size() > seen.size()) ++growths;
    seen = now;
    if (r["terminal"].get<bool>()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  CHECK(growths >= 2);
  auto done = f.svc->get_run(id);
  CHECK(done["state"] == "Applied");
  CHECK(done["reasoning"] == seen);

  // the event stream replays the same text, then the record
  auto r = f.cli->Get("/runs/" + id + "/stream");
  REQUIRE(r);
  CHECK(r->status == 200);
  std::string streamed;
  std::size_t pos = 0;
  bool saw_done = false;
  while ((pos = r->body.find("data: ", pos)) != std::string::npos) {
    auto end = r->body.find("\n\n", pos);
    auto ev = json::parse(r->body.substr(pos + 6, end - pos - 6));
    if (ev.contains("text")) {
      CHECK(ev["offset"] == streamed.size());
      streamed += ev["text"].get<std::string>();
    } else {
      saw_done = true;
      CHECK(ev["state"] == "Applied");
    }
    pos = end;
  }
  CHECK(saw_done);
  CHECK(streamed == seen);

  // live stream of a fresh run
  auto [st3, live] = f.post("/projects/" + pid + "/functions/sub_14F7/runs", R"({"task": "<funcname>", "model": "slow"})");
  REQUIRE(st3 == 202);
  std::string live_text;
  int chunks = 0;
  auto lr = f.cli->Get("/runs/" + live["id"].get<std::string>() + "/stream",
                       [&](const char* data, std::size_t n) {
                         live_text.append(data, n);
                         ++chunks;
                         return true;
                       });
  REQUIRE(lr);
  CHECK(chunks >= 2);
  CHECK(live_text.find("event: done") != std::string::npos);
  CHECK(f.cli->Get("/runs/nope/stream")->status == 404);
}

TEST_CASE("server: applying a rename changes the function view") {
  Fixture f("apply");
  auto pid = f.project("aes_sample.jsonl");
  auto run = f.run(pid, "sub_1909", "<vars>", "iv");
  REQUIRE(run["state"] == "Applied");
  REQUIRE(run["items"].size() == 1);
  CHECK(run["items"][0]["id"] == "var:v3");

  auto [st, applied] = f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": ["var:v3"]})");
  REQUIRE(st == 200);
  CHECK(applied["schema"] == kApplySchema);
  CHECK(applied["revision"] == 1);
  auto [st2, view] = f.get("/projects/" + pid + "/functions/sub_1909");
  REQUIRE(st2 == 200);
  CHECK(view["pseudocode"] == read_fixture("server/sub_1909_iv_ptr.txt"));
  CHECK(view["original"] != view["pseudocode"]);

  SUBCASE("empty selection is a no-op with an audit entry") {
    auto before = f.get("/projects/" + pid + "/overlay").second;
    auto [s, r] = f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": []})");
    CHECK(s == 200);
    CHECK(r["applied"].empty());
    auto after = f.get("/projects/" + pid + "/overlay").second;
    CHECK(after["overlay"] == before["overlay"]);
    CHECK(after["revision"] == 2);
    CHECK(f.get("/projects/" + pid + "/audit").second["entries"].size() == 2);
  }
  SUBCASE("re-applying is idempotent") {
    auto before = f.get("/projects/" + pid + "/overlay").second["overlay"];
    CHECK(f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": "all"})").first == 200);
    CHECK(f.get("/projects/" + pid + "/overlay").second["overlay"] == before);
  }
  SUBCASE("non-Applied runs cannot be applied") {
    auto bad = f.run(pid, "sub_1909", "<funcname>", "bad");
    auto [s, r] = f.post("/runs/" + bad["id"].get<std::string>() + "/apply", R"({"accept": "all"})");
    CHECK(s == 409);
    CHECK(r["error"] == "RunNotApplied");
  }
  SUBCASE("unknown items are rejected") {
    CHECK(f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": ["var:v7"]})").first == 400);
    CHECK(f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": 3})").first == 400);
    CHECK(f.post("/runs/r_none/apply", R"({"accept": "all"})").first == 404);
  }
}

TEST_CASE("server: names, types and callee renames render together") {
  Fixture f("full");
  auto pid = f.project("aes_sample.jsonl");
  for (auto [fn, task] : std::vector<std::pair<std::string, std::string>>{
           {"sub_14F7", "<funcname>"}, {"sub_1909", "<funcname>"}, {"sub_1909", "<vars>"}, {"sub_1909", "<args>"}}) {
    auto run = f.run(pid, fn, task, "analyst");
    REQUIRE(run["state"] == "Applied");
    REQUIRE(f.post("/runs/" + run["id"].get<std::string>() + "/apply", R"({"accept": "all"})").first == 200);
  }
  CHECK(f.get("/projects/" + pid + "/functions/sub_1909").second["pseudocode"] ==
        read_fixture("server/sub_1909_full.txt"));
  auto fns = f.get("/projects/" + pid + "/functions").second["functions"];
  std::set<std::string> shown;
  for (const auto& x : fns) shown.insert(x.value("display_name", x["name"].get<std::string>()));
  CHECK(shown == std::set<std::string>{"AES_CBC_encrypt_buffer", "Cipher"});
}

TEST_CASE("server: concurrent applies on one revision conflict") {
  Fixture f("conflict");
  auto pid = f.project("aes_sample.jsonl");
  auto a = f.run(pid, "sub_1909", "<vars>", "analyst");
  auto b = f.run(pid, "sub_1909", "<args>", "analyst");
  for (int round = 0; round < 10; ++round) {
    int base = f.get("/projects/" + pid + "/overlay").second["revision"];
    json body = {{"accept", "all"}, {"base_revision", base}};
    auto go = [&](const json& run) {
      httplib::Client c("127.0.0.1", f.http->port());
      auto r = c.Post("/runs/" + run["id"].get<std::string>() + "/apply", body.dump(), "application/json");
      return r ? r->status : -1;
    };
    auto fa = std::async(std::launch::async, go, a);
    auto fb = std::async(std::launch::async, go, b);
    std::multiset<int> codes{fa.get(), fb.get()};
    CHECK(codes == std::multiset<int>{200, 409});
  }
  CHECK(f.get("/projects/" + pid + "/overlay").second["revision"] == 10);
  CHECK(f.post("/runs/" + a["id"].get<std::string>() + "/apply", R"({"accept": "all", "base_revision": "x"})").first ==
        400);
}

TEST_CASE("server: audit replay reconstructs the overlay") {
  Fixture f("replay");
  auto pid = f.project("aes_sample.jsonl");
  std::vector<json> runs;
  for (auto [fn, task] : std::vector<std::pair<std::string, std::string>>{
           {"sub_14F7", "<funcname>"}, {"sub_1909", "<vars>"}, {"sub_1909", "<args>"}, {"sub_1909", "<funcname>"}})
    runs.push_back(f.run(pid, fn, task, "analyst"));
  runs.push_back(f.run(pid, "sub_1909", "<vars>", "iv"));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 25; ++i) {
    const auto& r = runs[rng() % runs.size()];
    json accept = json::array();
    for (const auto& it : r["items"])
      if (rng() % 2) accept.push_back(it["id"]);
    REQUIRE(f.post("/runs/" + r["id"].get<std::string>() + "/apply", json{{"accept", accept}}.dump()).first == 200);
  }
  std::vector<AuditEntry> log;
  auto entries = f.get("/projects/" + pid + "/audit").second["entries"];
  for (const auto& e : entries) log.push_back(audit_from_json(e));
  CHECK(log.size() == 25);
  auto live = f.get("/projects/" + pid + "/overlay").second["overlay"];
  CHECK(to_json(replay(log)) == live);
  // replaying twice is the same as once
  auto doubled = log;
  doubled.insert(doubled.end(), log.begin(), log.end());
  CHECK(to_json(replay(doubled)) == live);
  // the view depends on the overlay only
  auto view = f.get("/projects/" + pid + "/functions/sub_1909").second["pseudocode"];
  f.shutdown();
  f.boot();
  CHECK(f.get("/projects/" + pid + "/overlay").second["overlay"] == live);
  CHECK(f.get("/projects/" + pid + "/functions/sub_1909").second["pseudocode"] == view);
}

TEST_CASE("server: restart keeps terminal runs") {
  Fixture f("restart");
  auto pid = f.project("aes_sample.jsonl");
  auto ok = f.run(pid, "sub_1909", "<vars>", "analyst");
  auto bad = f.run(pid, "sub_1909", "<funcname>", "bad");
  f.shutdown();
  f.boot();
  for (const auto& before : {ok, bad}) {
    auto [st, after] = f.get("/runs/" + before["id"].get<std::string>());
    REQUIRE(st == 200);
    CHECK(after == before);
  }
  CHECK(f.get("/projects/" + pid + "/functions").second["functions"].size() == 2);
  // applying after the restart still works
  CHECK(f.post("/runs/" + ok["id"].get<std::string>() + "/apply", R"({"accept": "all"})").first == 200);
}

TEST_CASE("server: benchmark reports") {
  Fixture f("report");
  auto [st, made] = f.post("/reports", json{{"dataset", fixture_path("bench/hand10")},
                                            {"adapter", "replay"},
                                            {"tasks", json::array()}}
                                           .dump());
  REQUIRE(st == 201);
  CHECK(made["schema"] == kReportSchema);
  auto [st2, got] = f.get("/reports/" + made["id"].get<std::string>());
  CHECK(st2 == 200);
  CHECK(got == made);
  CHECK(got["report"]["success_ratio"].get<double>() == doctest::Approx(0.7));
  CHECK(f.get("/reports/rep_missing").first == 404);
  CHECK(f.post("/reports", json{{"dataset", "/nonexistent"}}.dump()).first == 400);
  CHECK(f.post("/reports", json{{"dataset", fixture_path("bench/hand10")}, {"adapter", "what"}}.dump()).first == 400);
}

TEST_CASE("server: concurrent requests stay consistent") {
  Fixture f("concurrent");
  auto pid = f.project("aes_sample.jsonl");
  std::vector<std::future<std::string>> launches;
  const std::vector<std::string> tasks{"<funcname>", "<vars>", "<args>", "<summary-en>"};
  for (int i = 0; i < 8; ++i)
    launches.push_back(std::async(std::launch::async, [&, i] {
      httplib::Client c("127.0.0.1", f.http->port());
      std::string fn = i % 2 ? "sub_14F7" : "sub_1909";
      auto r = c.Post("/projects/" + pid + "/functions/" + fn + "/runs",
                      json{{"task", tasks[i / 2]}, {"model", "mock"}}.dump(), "application/json");
      if (!r || r->status != 202) return std::string();
      for (int k = 0; k < 20; ++k) c.Get("/projects/" + pid + "/functions/" + fn);
      return json::parse(r->body)["id"].get<std::string>();
    }));
  std::set<std::string> ids;
  for (auto& l : launches) ids.insert(l.get());
  CHECK(ids.size() == 8);
  CHECK(ids.count("") == 0);
  for (const auto& id : ids) CHECK(f.svc->wait_terminal(id)["state"] == "Applied");
}

TEST_CASE("render_with_overlay leaves untouched code byte-identical") {
  auto dump = pseudoc::parse_dump_text(read_fixture("aes_sample.jsonl"));
  cgraph::CallGraph g(dump);
  const auto* fn = g.function("sub_1909");
  CHECK(render_with_overlay(*fn, {}) == fn->source());
  Overlay o;
  o["sub_1909"]["v3"] = {"v3", ""};
  CHECK(render_with_overlay(*fn, o) == fn->source());
  // symbols of other functions and unknown symbols are ignored
  o.clear();
  o["sub_14F7"]["i"] = {"round", ""};
  o["sub_1909"]["nope"] = {"x", "int"};
  CHECK(render_with_overlay(*fn, o) == fn->source());
}
