#include "recon/server/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "recon/bench/runner.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/error.hpp"
#include "recon/llmgate/config.hpp"
#include "recon/pseudoc/lexer.hpp"

namespace recon::server {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void append_line(const fs::path& path, const std::string& line) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path.string());
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "append failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // a torn last line from a crash is dropped
    auto j = json::parse(line, nullptr, false);
    if (!j.is_discarded()) out.push_back(std::move(j));
  }
  return out;
}

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownFunction:
      return 404;
    case ErrorCode::EmptyDump:
    case ErrorCode::DuplicateFunction:
    case ErrorCode::ParseFailure:
    case ErrorCode::UnknownVariable:
    case ErrorCode::FormatError:
    case ErrorCode::SchemaError:
    case ErrorCode::UnknownType:
    case ErrorCode::BudgetTooSmall:
    case ErrorCode::DatasetError:
    case ErrorCode::InvalidArgument:
      return 400;
    default:
      return 500;
  }
}

ApiError api(const Error& e) { return ApiError(status_for(e.code()), std::string(to_string(e.code())), e.what()); }

std::string decl_text(const std::string& type, const std::string& name) {
  if (!type.empty() && type.back() == '*') return type + name;
  return type + " " + name;
}

json item_json(const ApplyItem& it) {
  json j = {{"id", it.id}, {"function", it.function}, {"symbol", it.symbol}};
  if (!it.edit.new_name.empty()) j["new_name"] = it.edit.new_name;
  if (!it.edit.new_type.empty()) j["new_type"] = it.edit.new_type;
  return j;
}

ApplyItem item_from_json(const json& j) {
  ApplyItem it;
  it.id = j.at("id").get<std::string>();
  it.function = j.at("function").get<std::string>();
  it.symbol = j.at("symbol").get<std::string>();
  it.edit.new_name = j.value("new_name", "");
  it.edit.new_type = j.value("new_type", "");
  return it;
}

}  // namespace

// ---- overlay ----

json to_json(const Overlay& overlay) {
  json fns = json::object();
  for (const auto& [fn, syms] : overlay) {
    json s = json::object();
    for (const auto& [sym, e] : syms) {
      json x = json::object();
      if (!e.new_name.empty()) x["new_name"] = e.new_name;
      if (!e.new_type.empty()) x["new_type"] = e.new_type;
      s[sym] = x;
    }
    fns[fn] = s;
  }
  return fns;
}

json to_json(const AuditEntry& e) {
  json items = json::array();
  for (const auto& it : e.items) items.push_back(item_json(it));
  return {{"schema", kAuditSchema}, {"seq", e.seq}, {"run_id", e.run_id}, {"items", items}, {"at", e.at}};
}

AuditEntry audit_from_json(const json& j) {
  AuditEntry e;
  e.seq = j.at("seq").get<int>();
  e.run_id = j.value("run_id", "");
  e.at = j.value("at", "");
  for (const auto& it : j.at("items")) e.items.push_back(item_from_json(it));
  return e;
}

void apply_items(Overlay& overlay, const std::vector<ApplyItem>& items) {
  for (const auto& it : items) {
    auto& e = overlay[it.function][it.symbol];
    if (!it.edit.new_name.empty()) e.new_name = it.edit.new_name;
    if (!it.edit.new_type.empty()) e.new_type = it.edit.new_type;
  }
}

Overlay replay(const std::vector<AuditEntry>& log) {
  Overlay o;
  for (const auto& e : log) apply_items(o, e.items);
  return o;
}

std::string render_with_overlay(const pseudoc::PseudoFunction& fn, const Overlay& overlay) {
  const std::string& src = fn.source();
  std::map<std::string, std::string> fn_renames;
  for (const auto& [name, syms] : overlay) {
    auto it = syms.find(kFunctionSymbol);
    if (it != syms.end() && !it->second.new_name.empty()) fn_renames[name] = it->second.new_name;
  }
  std::map<std::string, std::string> var_renames;
  struct Edit {
    std::size_t begin, end;
    std::string text;
  };
  std::vector<Edit> edits;
  if (auto o = overlay.find(fn.name()); o != overlay.end()) {
    for (const auto& [sym, e] : o->second) {
      if (sym == kFunctionSymbol) continue;
      const auto* v = fn.find_var(sym);
      if (!v) continue;
      std::string name = e.new_name.empty() ? v->name : e.new_name;
      if (!e.new_name.empty()) var_renames[sym] = e.new_name;
      if (!e.new_type.empty() && v->owns_type && v->type_end > v->type_begin)
        edits.push_back({v->type_begin, v->type_end, decl_text(e.new_type, name)});
    }
  }
  auto covered = [&](std::size_t pos) {
    for (const auto& e : edits)
      if (pos >= e.begin && pos < e.end) return true;
    return false;
  };
  for (const auto& t : pseudoc::lex(src)) {
    if (t.kind != pseudoc::TokenKind::Identifier || covered(t.begin)) continue;
    std::string word(t.text);
    if (auto v = var_renames.find(word); v != var_renames.end())
      edits.push_back({t.begin, t.end, v->second});
    else if (auto f = fn_renames.find(word); f != fn_renames.end())
      edits.push_back({t.begin, t.end, f->second});
  }
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin > b.begin; });
  std::string out = src;
  for (const auto& e : edits) out.replace(e.begin, e.end - e.begin, e.text);
  return out;
}

std::vector<ApplyItem> prediction_items(const pseudoc::PseudoFunction& fn, const promptkit::Prediction& pred) {
  std::vector<ApplyItem> out;
  auto put = [&](ApplyItem it) {
    for (auto& o : out)
      if (o.id == it.id) {
        o = std::move(it);
        return;
      }
    out.push_back(std::move(it));
  };
  const auto& p = pred.payload;
  using promptkit::TaskFamily;
  auto fam = pred.task.family;
  if ((fam == TaskFamily::FuncName || fam == TaskFamily::Signature || fam == TaskFamily::FuncAnalysis) &&
      p.contains("function_name") && p["function_name"].is_string())
    put({"function", fn.name(), kFunctionSymbol, {p["function_name"].get<std::string>(), ""}});
  if ((fam == TaskFamily::Signature || fam == TaskFamily::FuncAnalysis) && p.contains("args") &&
      p["args"].is_array()) {
    const auto& args = p["args"];
    for (std::size_t i = 0; i < args.size() && i < fn.params.size(); ++i) {
      const auto& a = args[i];
      put({"var:" + fn.params[i].name, fn.name(), fn.params[i].name,
           {a.value("name", ""), a.value("type", "")}});
    }
  }
  if (p.contains("variables") && p["variables"].is_array()) {
    for (const auto& v : p["variables"]) {
      auto old = v.value("old", "");
      if (!fn.find_var(old)) continue;
      put({"var:" + old, fn.name(), old, {v.value("new_name", ""), v.value("new_type", "")}});
    }
  }
  return out;
}

std::string_view to_string(RunState s) {
  switch (s) {
    case RunState::Queued: return "Queued";
    case RunState::Running: return "Running";
    case RunState::Applied: return "Applied";
    case RunState::ExhaustedRetries: return "ExhaustedRetries";
    case RunState::TransportFailed: return "TransportFailed";
    case RunState::Failed: return "Failed";
  }
  return "?";
}

bool is_terminal(RunState s) { return s != RunState::Queued && s != RunState::Running; }

namespace {

RunState state_from(std::string_view s) {
  for (auto st : {RunState::Queued, RunState::Running, RunState::Applied, RunState::ExhaustedRetries,
                  RunState::TransportFailed, RunState::Failed})
    if (to_string(st) == s) return st;
  return RunState::Failed;
}

}  // namespace

json ApiError::body() const { return {{"schema", kErrorSchema}, {"error", code_}, {"message", what()}}; }

// ---- service ----

struct Service::Project {
  std::string id;
  std::string created_at;
  std::string dump_text;
  std::unique_ptr<cgraph::CallGraph> graph;
  std::vector<pseudoc::RejectedLine> rejects;
  fs::path dir;

  std::mutex overlay_mu;  // single writer for overlay and audit
  Overlay overlay;
  std::vector<AuditEntry> audit;
};

struct Service::Run {
  std::string id;
  std::string project;
  std::string target;
  std::string task;
  std::string model;
  std::string created_at;

  mutable std::mutex mu;
  mutable std::condition_variable cv;
  RunState state = RunState::Queued;
  int attempt = -1;
  std::string reasoning;  // streamed chunks, all attempts
  std::string finished_at;
  json result;  // to_json(TaskRun) once terminal
  std::string error;
  std::vector<ApplyItem> items;
};

Service::Service(ServiceOptions opts) : opts_(std::move(opts)) {
  if (opts_.data_dir.empty()) throw Error(ErrorCode::InvalidArgument, "data_dir is required");
  fs::create_directories(opts_.data_dir / "projects");
  fs::create_directories(opts_.data_dir / "reports");
  load_store();
  int n = std::max(1, opts_.workers);
  for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lk(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

std::string Service::new_id(const char* prefix) {
  static thread_local std::mt19937_64 rng(std::random_device{}() ^
                                          static_cast<std::uint64_t>(
                                              std::chrono::steady_clock::now().time_since_epoch().count()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%012llx", prefix, static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
  return buf;
}

void Service::load_store() {
  for (const auto& entry : fs::directory_iterator(opts_.data_dir / "projects")) {
    auto file = entry.path() / "project.json";
    if (!fs::exists(file)) continue;
    auto doc = json::parse(read_file(file), nullptr, false);
    if (doc.is_discarded()) continue;
    auto p = std::make_shared<Project>();
    p->id = doc.at("id").get<std::string>();
    p->created_at = doc.value("created_at", "");
    p->dump_text = doc.at("dump").get<std::string>();
    auto dump = pseudoc::parse_dump_text(p->dump_text);
    p->rejects = dump.rejects;
    p->graph = std::make_unique<cgraph::CallGraph>(std::move(dump));
    p->dir = entry.path();
    for (const auto& j : read_jsonl(p->dir / "audit.jsonl")) p->audit.push_back(audit_from_json(j));
    p->overlay = replay(p->audit);
    projects_[p->id] = p;
  }
  for (const auto& j : read_jsonl(opts_.data_dir / "runs.jsonl")) {
    auto r = std::make_shared<Run>();
    r->id = j.at("id").get<std::string>();
    r->project = j.value("project", "");
    r->target = j.value("function", "");
    r->task = j.value("task", "");
    r->model = j.value("model", "");
    r->created_at = j.value("created_at", "");
    r->finished_at = j.value("finished_at", "");
    r->state = state_from(j.value("state", "Failed"));
    r->attempt = j.value("attempt", -1);
    r->reasoning = j.value("reasoning", "");
    r->result = j.value("result", json());
    r->error = j.value("error", "");
    for (const auto& it : j.value("items", json::array())) r->items.push_back(item_from_json(it));
    runs_[r->id] = r;
  }
}

std::shared_ptr<Service::Project> Service::project(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = projects_.find(id);
  if (it == projects_.end()) throw ApiError(404, "UnknownProject", "no project " + id);
  return it->second;
}

std::shared_ptr<Service::Run> Service::run(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw ApiError(404, "UnknownRun", "no run " + id);
  return it->second;
}

json Service::create_project(std::string_view dump_jsonl) {
  pseudoc::DecompDump dump;
  try {
    dump = pseudoc::parse_dump_text(dump_jsonl);
  } catch (const Error& e) {
    throw api(e);
  }
  auto p = std::make_shared<Project>();
  p->created_at = utc_now();
  p->dump_text = std::string(dump_jsonl);
  p->rejects = dump.rejects;
  p->graph = std::make_unique<cgraph::CallGraph>(std::move(dump));
  {
    std::lock_guard lk(mu_);
    do p->id = new_id("p");
    while (projects_.count(p->id));
  }
  p->dir = opts_.data_dir / "projects" / p->id;
  write_atomic(p->dir / "project.json",
               json{{"schema", kProjectSchema}, {"id", p->id}, {"created_at", p->created_at}, {"dump", p->dump_text}}
                   .dump());
  {
    std::lock_guard lk(mu_);
    projects_[p->id] = p;
  }
  return get_project(p->id);
}

json Service::get_project(const std::string& id) const {
  auto p = project(id);
  const auto& d = p->graph->dump();
  json rejects = json::array();
  for (const auto& r : p->rejects) rejects.push_back({{"line", r.line}, {"reason", r.reason}});
  std::lock_guard lk(p->overlay_mu);
  return {{"schema", kProjectSchema},
          {"id", p->id},
          {"created_at", p->created_at},
          {"project_name", d.project_name},
          {"binary_name", d.binary_name},
          {"function_count", d.functions.size()},
          {"rejects", rejects},
          {"revision", p->audit.size()}};
}

json Service::list_functions(const std::string& id) const {
  auto p = project(id);
  std::map<std::string, std::string> renamed;
  {
    std::lock_guard lk(p->overlay_mu);
    for (const auto& [fn, syms] : p->overlay)
      if (auto it = syms.find(kFunctionSymbol); it != syms.end() && !it->second.new_name.empty())
        renamed[fn] = it->second.new_name;
  }
  json fns = json::array();
  for (const auto& f : p->graph->dump().functions) {
    json j = {{"name", f.name}, {"address", f.address}, {"external", f.is_external}};
    if (!f.is_external) {
      if (const auto* fn = p->graph->function(f.name)) j["lines"] = fn->line_count;
    }
    if (auto it = renamed.find(f.name); it != renamed.end()) j["display_name"] = it->second;
    fns.push_back(j);
  }
  return {{"schema", kFunctionsSchema}, {"project", id}, {"functions", fns}};
}

json Service::function_view(const std::string& id, const std::string& name) const {
  auto p = project(id);
  const auto* fn = p->graph->function(name);
  if (!fn) throw ApiError(404, "UnknownFunction", "no function " + name + " in " + id);
  std::lock_guard lk(p->overlay_mu);
  json edits = json::object();
  if (auto it = p->overlay.find(name); it != p->overlay.end()) edits = to_json(Overlay{{name, it->second}})[name];
  return {{"schema", kFunctionSchema},
          {"project", id},
          {"name", name},
          {"address", fn->record.address},
          {"original", fn->source()},
          {"pseudocode", render_with_overlay(*fn, p->overlay)},
          {"overlay", edits},
          {"revision", p->audit.size()}};
}

json Service::preview_context(const std::string& id, const std::string& name, std::optional<int> depth,
                              std::optional<int> k) const {
  auto p = project(id);
  if (!p->graph->function(name)) throw ApiError(404, "UnknownFunction", "no function " + name + " in " + id);
  auto cfg = opts_.run_options.ctx;
  if (depth) {
    if (*depth < 0) throw ApiError(400, "InvalidArgument", "depth must be >= 0");
    cfg.depth_callee = cfg.depth_caller = *depth;
  }
  if (k) {
    if (*k < 0) throw ApiError(400, "InvalidArgument", "k must be >= 0");
    cfg.k = *k;
  }
  try {
    auto traces = dflow::trace_all(*p->graph, name, cfg);
    std::set<std::string> reached;
    for (const auto& t : traces)
      for (const auto& f : t.functions())
        if (f != name) reached.insert(f);
    auto sel = cgraph::select_context(cgraph::collect_context(*p->graph, name, cfg), cfg, reached);

    std::vector<const pseudoc::PseudoFunction*> shown{p->graph->function(name)};
    for (const auto& s : sel.selected)
      if (const auto* f = p->graph->function(s)) shown.push_back(f);
    json annotated = json::object();
    for (const auto& [fn, text] : dflow::annotate(shown, traces)) annotated[fn] = text;
    json tr = json::array();
    for (const auto& t : traces) tr.push_back(dflow::to_json(t));
    return {{"schema", kContextSchema},
            {"project", id},
            {"target", name},
            {"config", {{"depth_callee", cfg.depth_callee}, {"depth_caller", cfg.depth_caller}, {"k", cfg.k}}},
            {"selection", cgraph::to_json(sel)},
            {"annotated", annotated},
            {"traces", tr}};
  } catch (const Error& e) {
    throw api(e);
  }
}

std::shared_ptr<llmgate::LlmClient> Service::client(const std::string& model) {
  std::lock_guard lk(mu_);
  if (auto it = clients_.find(model); it != clients_.end()) return it->second;
  std::shared_ptr<llmgate::LlmClient> c;
  if (opts_.resolver) c = opts_.resolver(model);
  if (!c) {
    auto file = opts_.configs_dir / (model + ".toml");
    if (!opts_.configs_dir.empty() && fs::exists(file)) {
      c = std::make_shared<llmgate::LlmClient>(llmgate::load_config(file.string()));
    } else if (model == "mock") {
      llmgate::LlmConfig cfg;
      cfg.transport = "mock";
      c = std::make_shared<llmgate::LlmClient>(cfg);
    } else {
      throw ApiError(400, "UnknownModel", "no model config '" + model + "'");
    }
  }
  clients_[model] = c;
  return c;
}

json Service::launch_run(const std::string& id, const std::string& name, const json& body) {
  auto p = project(id);
  const auto* fn = p->graph->function(name);
  if (!fn) throw ApiError(404, "UnknownFunction", "no function " + name + " in " + id);
  if (!body.is_object() || !body.contains("task") || !body["task"].is_string())
    throw ApiError(400, "FormatError", "body needs a string 'task'");
  promptkit::TaskSpec task;
  try {
    task = promptkit::TaskSpec::parse(body["task"].get<std::string>());
  } catch (const Error& e) {
    throw api(e);
  }
  if (!task.param.empty() && !fn->find_var(task.param))
    throw ApiError(400, "UnknownVariable", "no variable " + task.param + " in " + name);
  std::string model = body.value("model", "mock");
  client(model);  // unknown models fail before queueing

  auto r = std::make_shared<Run>();
  r->project = id;
  r->target = name;
  r->task = task.tag();
  r->model = model;
  r->created_at = utc_now();
  {
    std::lock_guard lk(mu_);
    for (const auto& [_, other] : runs_) {
      if (other->project != id || other->target != name || other->task != r->task) continue;
      std::lock_guard rl(other->mu);
      if (!is_terminal(other->state))
        throw ApiError(409, "DuplicateRun", "run " + other->id + " for the same target and task is in flight");
    }
    do r->id = new_id("r");
    while (runs_.count(r->id));
    runs_[r->id] = r;
  }
  {
    std::lock_guard lk(queue_mu_);
    queue_.push_back(r);
  }
  queue_cv_.notify_one();
  return get_run(r->id);
}

void Service::worker_loop() {
  for (;;) {
    std::shared_ptr<Run> r;
    {
      std::unique_lock lk(queue_mu_);
      queue_cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      r = queue_.front();
      queue_.pop_front();
    }
    execute(r);
  }
}

void Service::execute(const std::shared_ptr<Run>& r) {
  {
    std::lock_guard lk(r->mu);
    r->state = RunState::Running;
  }
  r->cv.notify_all();
  RunState final_state = RunState::Failed;
  try {
    auto p = project(r->project);
    auto c = client(r->model);
    auto task = promptkit::TaskSpec::parse(r->task);
    llmgate::RunObserver obs;
    obs.on_attempt = [&](int i) {
      {
        std::lock_guard lk(r->mu);
        r->attempt = i;
      }
      r->cv.notify_all();
    };
    obs.on_chunk = [&](std::string_view chunk) {
      {
        std::lock_guard lk(r->mu);
        r->reasoning.append(chunk);
      }
      r->cv.notify_all();
    };
    auto tr = llmgate::run_task(*p->graph, r->target, task, *c, opts_.run_options, obs);
    std::lock_guard lk(r->mu);
    r->result = llmgate::to_json(tr);
    r->error = tr.error;
    switch (tr.status) {
      case llmgate::RunStatus::Applied:
        final_state = RunState::Applied;
        r->items = prediction_items(*p->graph->function(r->target), *tr.final);
        break;
      case llmgate::RunStatus::ExhaustedRetries:
        final_state = RunState::ExhaustedRetries;
        break;
      case llmgate::RunStatus::TransportFailed:
        final_state = RunState::TransportFailed;
        break;
    }
    // transports that do not stream still leave the answer visible
    if (r->reasoning.empty() && !tr.attempts.empty()) r->reasoning = tr.attempts.back().raw;
  } catch (const Error& e) {
    std::lock_guard lk(r->mu);
    r->error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    std::lock_guard lk(r->mu);
    r->error = e.what();
  }
  finish(r, final_state);
}

// The terminal state and the persisted record appear together.
void Service::finish(const std::shared_ptr<Run>& r, RunState state) {
  json doc;
  {
    std::lock_guard lk(r->mu);
    r->state = state;
    r->finished_at = utc_now();
    doc = run_json(*r, 0);
  }
  try {
    std::lock_guard lk(store_mu_);
    append_line(opts_.data_dir / "runs.jsonl", doc.dump());
  } catch (const std::exception&) {
    // still served from memory; lost on restart
  }
  r->cv.notify_all();
}

json Service::run_json(const Run& r, std::size_t from) const {
  json items = json::array();
  for (const auto& it : r.items) items.push_back(item_json(it));
  json j = {{"schema", kRunSchema},
            {"id", r.id},
            {"project", r.project},
            {"function", r.target},
            {"task", r.task},
            {"model", r.model},
            {"state", to_string(r.state)},
            {"terminal", is_terminal(r.state)},
            {"attempt", r.attempt},
            {"created_at", r.created_at},
            {"reasoning_length", r.reasoning.size()},
            {"reasoning_from", std::min(from, r.reasoning.size())},
            {"reasoning", from < r.reasoning.size() ? r.reasoning.substr(from) : std::string()},
            {"items", items}};
  if (is_terminal(r.state)) {
    j["finished_at"] = r.finished_at;
    j["result"] = r.result;
  }
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json Service::get_run(const std::string& run_id, std::size_t from) const {
  auto r = run(run_id);
  std::lock_guard lk(r->mu);
  return run_json(*r, from);
}

std::pair<std::string, bool> Service::wait_run(const std::string& run_id, std::size_t from,
                                               double timeout_seconds) const {
  auto r = run(run_id);
  std::unique_lock lk(r->mu);
  r->cv.wait_for(lk, std::chrono::duration<double>(timeout_seconds),
                 [&] { return r->reasoning.size() > from || is_terminal(r->state); });
  bool done = is_terminal(r->state);
  std::string text = from < r->reasoning.size() ? r->reasoning.substr(from) : std::string();
  return {text, done};
}

json Service::wait_terminal(const std::string& run_id, double timeout_seconds) const {
  auto r = run(run_id);
  std::unique_lock lk(r->mu);
  r->cv.wait_for(lk, std::chrono::duration<double>(timeout_seconds),
                 [&] { return is_terminal(r->state); });
  return run_json(*r, 0);
}

json Service::apply(const std::string& run_id, const json& body) {
  auto r = run(run_id);
  std::vector<ApplyItem> offered;
  {
    std::lock_guard lk(r->mu);
    if (r->state != RunState::Applied)
      throw ApiError(409, "RunNotApplied", "run " + run_id + " is " + std::string(to_string(r->state)));
    offered = r->items;
  }
  auto p = project(r->project);
  if (!body.is_object()) throw ApiError(400, "FormatError", "body must be an object");

  std::vector<ApplyItem> chosen;
  const auto accept = body.value("accept", json::array());
  if (accept.is_string() && accept.get<std::string>() == "all") {
    chosen = offered;
  } else if (accept.is_array()) {
    std::set<std::string> seen;
    for (const auto& a : accept) {
      if (!a.is_string()) throw ApiError(400, "FormatError", "accept entries must be item ids");
      auto id = a.get<std::string>();
      auto it = std::find_if(offered.begin(), offered.end(), [&](const ApplyItem& x) { return x.id == id; });
      if (it == offered.end()) throw ApiError(400, "UnknownItem", "run " + run_id + " offers no item " + id);
      if (seen.insert(id).second) chosen.push_back(*it);
    }
  } else {
    throw ApiError(400, "FormatError", "accept must be \"all\" or a list of item ids");
  }

  std::lock_guard lk(p->overlay_mu);
  int revision = static_cast<int>(p->audit.size());
  if (body.contains("base_revision") && !body["base_revision"].is_null()) {
    if (!body["base_revision"].is_number_integer())
      throw ApiError(400, "FormatError", "base_revision must be an integer");
    int base = body["base_revision"].get<int>();
    if (base != revision)
      throw ApiError(409, "Conflict",
                     "overlay is at revision " + std::to_string(revision) + ", not " + std::to_string(base));
  }
  AuditEntry entry{revision + 1, run_id, chosen, utc_now()};
  try {
    append_line(p->dir / "audit.jsonl", to_json(entry).dump());
  } catch (const Error& e) {
    throw api(e);
  }
  p->audit.push_back(entry);
  apply_items(p->overlay, chosen);
  json applied = json::array();
  for (const auto& it : chosen) applied.push_back(item_json(it));
  return {{"schema", kApplySchema},
          {"project", p->id},
          {"run", run_id},
          {"revision", entry.seq},
          {"applied", applied},
          {"overlay", to_json(p->overlay)}};
}

json Service::overlay(const std::string& id) const {
  auto p = project(id);
  std::lock_guard lk(p->overlay_mu);
  return {{"schema", kOverlaySchema}, {"project", id}, {"revision", p->audit.size()}, {"overlay", to_json(p->overlay)}};
}

json Service::audit(const std::string& id) const {
  auto p = project(id);
  std::lock_guard lk(p->overlay_mu);
  json entries = json::array();
  for (const auto& e : p->audit) entries.push_back(to_json(e));
  return {{"schema", kAuditSchema}, {"project", id}, {"entries", entries}};
}

json Service::create_report(const json& body) {
  if (!body.is_object() || !body.contains("dataset") || !body["dataset"].is_string())
    throw ApiError(400, "FormatError", "body needs a string 'dataset'");
  fs::path dataset = body["dataset"].get<std::string>();
  std::string adapter_name = body.value("adapter", "replay");
  bench::BenchConfig cfg;
  if (body.contains("tasks")) cfg.tasks = body["tasks"].get<std::vector<std::string>>();
  std::shared_ptr<llmgate::LlmClient> model;
  if (body.contains("model")) {
    model = client(body["model"].get<std::string>());
    cfg.judge = bench::model_judge(*model);
  }
  std::unique_ptr<bench::Adapter> adapter;
  if (adapter_name == "replay") {
    adapter = std::make_unique<bench::ReplayAdapter>();
  } else if (adapter_name == "recopilot") {
    if (!model) throw ApiError(400, "FormatError", "adapter recopilot needs 'model'");
    adapter = std::make_unique<bench::ModelAdapter>(*model, opts_.run_options);
  } else {
    throw ApiError(400, "FormatError", "unknown adapter " + adapter_name);
  }
  bench::EvalReport report;
  try {
    report = bench::run_benchmark(dataset, *adapter, cfg);
  } catch (const Error& e) {
    throw api(e);
  }
  std::string id;
  {
    std::lock_guard lk(mu_);
    id = new_id("rep");
  }
  json doc = {{"schema", kReportSchema}, {"id", id}, {"created_at", utc_now()}, {"report", report.to_json()}};
  write_atomic(opts_.data_dir / "reports" / (id + ".json"), doc.dump(2));
  return doc;
}

json Service::get_report(const std::string& id) const {
  if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos)
    throw ApiError(400, "FormatError", "bad report id");
  auto file = opts_.data_dir / "reports" / (id + ".json");
  if (!fs::exists(file)) throw ApiError(404, "UnknownReport", "no report " + id);
  return json::parse(read_file(file));
}

}  // namespace recon::server
