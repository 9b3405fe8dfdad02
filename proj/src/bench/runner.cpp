#include "recon/bench/runner.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "recon/error.hpp"
#include "recon/pseudoc/function.hpp"

namespace recon::bench {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const GroundTruth& t) {
  j = {{"function", t.function}, {"true_name", t.true_name}, {"vars", json::array()}, {"structs", json::array()},
       {"source_code", t.source_code}};
  for (const auto& v : t.vars) {
    j["vars"].push_back({{"pseudo_name", v.pseudo_name}, {"true_name", v.true_name}, {"true_type", v.true_type}});
  }
  for (const auto& s : t.structs) j["structs"].push_back(s);
  if (t.reference_summary) j["reference_summary"] = *t.reference_summary;
  if (!t.tasks.empty()) j["tasks"] = t.tasks;
}

void from_json(const json& j, GroundTruth& t) {
  t.function = j.at("function").get<std::string>();
  t.true_name = j.value("true_name", "");
  t.vars.clear();
  for (const auto& v : j.value("vars", json::array())) {
    t.vars.push_back({v.at("pseudo_name").get<std::string>(), v.value("true_name", ""), v.value("true_type", "")});
  }
  t.structs.clear();
  for (const auto& s : j.value("structs", json::array())) t.structs.push_back(s.get<StructLayout>());
  t.source_code = j.value("source_code", "");
  t.reference_summary.reset();
  if (j.contains("reference_summary") && j["reference_summary"].is_string()) {
    t.reference_summary = j["reference_summary"].get<std::string>();
  }
  t.tasks = j.value("tasks", std::vector<std::string>{});
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::DatasetError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

BenchCase load_case(const fs::path& dir) {
  BenchCase c;
  c.dir = dir;
  c.name = dir.filename().string();
  if (c.name.empty()) c.name = dir.parent_path().filename().string();
  auto dump_path = dir / "dump.jsonl";
  auto truth_path = dir / "truth.json";
  if (!fs::exists(dump_path)) throw Error(ErrorCode::DatasetError, c.name + ": missing dump.jsonl");
  if (!fs::exists(truth_path)) throw Error(ErrorCode::DatasetError, c.name + ": missing ground truth (truth.json)");
  try {
    c.dump = pseudoc::parse_dump_text(slurp(dump_path));
  } catch (const Error& e) {
    throw Error(ErrorCode::DatasetError, c.name + ": dump.jsonl: " + e.what());
  }
  json doc;
  try {
    doc = json::parse(slurp(truth_path));
    for (const auto& t : doc.at("functions")) c.truth.push_back(t.get<GroundTruth>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DatasetError, c.name + ": truth.json: " + e.what());
  }
  for (const auto& t : c.truth) {
    const auto* rec = c.dump.find(t.function);
    if (!rec) throw Error(ErrorCode::DatasetError, c.name + ": ground truth for unknown function " + t.function);
    auto fn = pseudoc::parse_function(*rec);
    for (const auto& v : t.vars) {
      if (!fn.find_var(v.pseudo_name)) {
        throw Error(ErrorCode::DatasetError, c.name + ": " + t.function + " declares no variable " + v.pseudo_name);
      }
    }
    for (const auto& s : t.structs) {
      try {
        s.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::DatasetError, c.name + ": " + e.what());
      }
    }
  }
  return c;
}

std::vector<BenchCase> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::DatasetError, "no dataset directory " + root.string());
  if (fs::exists(root / "dump.jsonl")) return {load_case(root)};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "dump.jsonl")) dirs.push_back(e.path());
  }
  if (dirs.empty()) throw Error(ErrorCode::DatasetError, root.string() + " holds no cases");
  std::sort(dirs.begin(), dirs.end());
  std::vector<BenchCase> out;
  for (const auto& d : dirs) out.push_back(load_case(d));
  return out;
}

ReplayAdapter::ReplayAdapter(int max_retries, TypeClusterTable clusters)
    : max_retries_(max_retries), clusters_(std::move(clusters)) {}

const std::map<std::pair<std::string, std::string>, std::vector<std::string>>& ReplayAdapter::records(
    const BenchCase& c) {
  auto key = c.dir.string();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto& out = cache_[key];
  auto path = c.dir / "replay.jsonl";
  if (!fs::exists(path)) return out;
  std::istringstream in(slurp(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      auto task = promptkit::TaskSpec::parse(j.at("task").get<std::string>()).tag();
      auto& list = out[{j.at("function").get<std::string>(), task}];
      if (j.contains("responses")) {
        for (const auto& r : j["responses"]) list.push_back(r.get<std::string>());
      } else {
        list.push_back(j.at("response").get<std::string>());
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::DatasetError, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

AdapterOutput ReplayAdapter::predict(const BenchCase& c, const cgraph::CallGraph& graph, const std::string& function,
                                     const promptkit::TaskSpec& task) {
  AdapterOutput out;
  const auto& recs = records(c);
  auto it = recs.find({function, task.tag()});
  if (it == recs.end()) {
    out.detail = "no recorded response";
    return out;
  }
  const auto* fn = graph.function(function);
  int limit = std::min<int>(1 + max_retries_, static_cast<int>(it->second.size()));
  for (int i = 0; i < limit; ++i) {
    ++out.attempts;
    try {
      auto pred = promptkit::parse_response(task, it->second[i]);
      auto report = promptkit::validate_prediction(pred, *fn, clusters_);
      if (report.ok) {
        out.status = llmgate::RunStatus::Applied;
        out.prediction = std::move(pred);
        out.detail.clear();
        return out;
      }
      out.detail = std::string(promptkit::to_string(report.violations.front().code)) + ": " +
                   report.violations.front().detail;
    } catch (const Error& e) {
      out.detail = std::string(to_string(e.code())) + ": " + e.what();
    }
  }
  return out;
}

AdapterOutput ModelAdapter::predict(const BenchCase&, const cgraph::CallGraph& graph, const std::string& function,
                                    const promptkit::TaskSpec& task) {
  auto run = llmgate::run_task(graph, function, task, client_, opts_);
  AdapterOutput out;
  out.status = run.status;
  out.attempts = static_cast<int>(run.attempts.size());
  out.prediction = run.final;
  if (!run.error.empty()) {
    out.detail = run.error;
  } else if (!run.final && !run.attempts.empty()) {
    out.detail = run.attempts.back().outcome;
  }
  return out;
}

JudgeFn model_judge(llmgate::LlmClient& client) {
  return [&client](const pseudoc::PseudoFunction& fn, std::string_view summary, const GroundTruth& truth) {
    std::optional<std::string_view> ref;
    if (!truth.source_code.empty()) ref = truth.source_code;
    return llmgate::judge_summary(client, fn.source(), summary, ref).score;
  };
}

namespace {

struct PredVar {
  std::string name;
  std::string type;
};

std::optional<std::string> struct_tag(std::string_view type) {
  try {
    auto shape = parse_type(type);
    return shape.base;
  } catch (const Error&) {
    return std::nullopt;
  }
}

StructLayout layout_from_payload(const json& s) {
  StructLayout l;
  l.name = s.value("name", "");
  for (const auto& m : s.value("members", json::array())) {
    StructMember mem{m.value("name", ""), m.value("offset", 0L), m.value("size", 0L)};
    l.total_size = std::max(l.total_size, mem.offset + mem.size);
    l.members.push_back(mem);
  }
  std::sort(l.members.begin(), l.members.end(),
            [](const StructMember& a, const StructMember& b) { return a.offset < b.offset; });
  return l;
}

}  // namespace

std::map<std::string, double> score_prediction(const promptkit::Prediction& pred, const pseudoc::PseudoFunction& fn,
                                               const GroundTruth& truth, const TypeClusterTable& clusters,
                                               const JudgeFn& judge) {
  using promptkit::TaskFamily;
  std::map<std::string, double> out;
  const auto& p = pred.payload;
  const auto family = pred.task.family;

  if (p.contains("function_name") && !truth.true_name.empty()) {
    out["func_name"] = rouge_name(p["function_name"].get<std::string>(), truth.true_name);
  }

  // Predicted names and types keyed by pseudo name.
  std::map<std::string, PredVar> vars;
  if (p.contains("variables")) {
    for (const auto& v : p["variables"]) {
      vars[v["old"].get<std::string>()] = {v.value("new_name", ""), v.value("new_type", "")};
    }
  }
  if (family == TaskFamily::Signature && p.contains("args")) {
    for (std::size_t i = 0; i < p["args"].size() && i < fn.params.size(); ++i) {
      vars[fn.params[i].name] = {p["args"][i].value("name", ""), p["args"][i].value("type", "")};
    }
  }

  std::vector<const VarTruth*> scope;
  auto in_scope = [&](const VarTruth& v) {
    const auto* decl = fn.find_var(v.pseudo_name);
    if (!decl) return false;
    switch (family) {
      case TaskFamily::Vars: return decl->kind == pseudoc::VarKind::Local;
      case TaskFamily::Args:
      case TaskFamily::Signature: return decl->kind == pseudoc::VarKind::Param;
      case TaskFamily::Var:
      case TaskFamily::Arg: return v.pseudo_name == pred.task.param;
      case TaskFamily::FuncAnalysis: return true;
      default: return false;
    }
  };
  for (const auto& v : truth.vars) {
    if (in_scope(v)) scope.push_back(&v);
  }

  if (!scope.empty()) {
    double names = 0, types = 0;
    for (const auto* v : scope) {
      auto it = vars.find(v->pseudo_name);
      if (it == vars.end()) continue;
      names += rouge_name(it->second.name, v->true_name);
      try {
        if (type_match(it->second.type, v->true_type, clusters)) types += 1;
      } catch (const Error&) {
        // unparseable prediction counts as a mismatch
      }
    }
    out["var_name"] = names / static_cast<double>(scope.size());
    out["var_type"] = types / static_cast<double>(scope.size());
  }

  // Structs: each in-scope variable whose true type names a ground-truth
  // struct is paired with the struct its predicted type names.
  if (!truth.structs.empty() && family != TaskFamily::Signature) {
    std::map<std::string, StructLayout> predicted;
    if (p.contains("structs")) {
      for (const auto& s : p["structs"]) {
        auto l = layout_from_payload(s);
        predicted[l.name] = l;
      }
    }
    double sum = 0;
    int n = 0;
    std::set<std::string> seen;
    for (const auto* v : scope) {
      auto tag = struct_tag(v->true_type);
      if (!tag) continue;
      auto gt = std::find_if(truth.structs.begin(), truth.structs.end(),
                             [&](const StructLayout& s) { return s.name == *tag; });
      if (gt == truth.structs.end() || !seen.insert(gt->name).second) continue;
      ++n;
      auto pv = vars.find(v->pseudo_name);
      if (pv == vars.end()) continue;
      auto ptag = struct_tag(pv->second.type);
      if (!ptag) continue;
      auto ps = predicted.find(*ptag);
      if (ps != predicted.end()) sum += struct_f1(ps->second, *gt).f1;
    }
    if (n > 0) out["struct"] = sum / n;
  }

  if (family == TaskFamily::Decompilation && !truth.source_code.empty()) {
    out["dec"] = codebleu(p.value("code", ""), truth.source_code);
  }

  if ((pred.task.is_summary() || family == TaskFamily::FuncAnalysis) && judge && p.contains("summary")) {
    out["sum"] = judge(fn, p["summary"].get<std::string>(), truth);
  }
  return out;
}

void EvalReport::recompute() {
  runs = static_cast<int>(rows.size());
  applied = 0;
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    if (!r.applied()) continue;
    ++applied;
    for (const auto& [k, v] : r.scores) {
      acc[k].first += v;
      acc[k].second += 1;
    }
  }
  aggregates.clear();
  for (const auto& [k, s] : acc) aggregates[k] = 100.0 * s.first / s.second;
  success_ratio = runs > 0 ? static_cast<double>(applied) / runs : 0.0;
}

json EvalReport::to_json() const {
  json j = {{"schema_version", kSchemaVersion}, {"metadata", metadata},   {"success_ratio", success_ratio},
            {"runs", runs},                     {"applied", applied},     {"aggregates", aggregates},
            {"rows", json::array()}};
  for (const auto& r : rows) {
    j["rows"].push_back({{"case", r.case_name},
                         {"function", r.function},
                         {"task", r.task},
                         {"status", r.status},
                         {"attempts", r.attempts},
                         {"detail", r.detail},
                         {"scores", r.scores}});
  }
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion) {
    throw Error(ErrorCode::FormatError, "unsupported report schema version");
  }
  EvalReport r;
  r.metadata = j.value("metadata", json::object());
  for (const auto& row : j.at("rows")) {
    EvalRow e;
    e.case_name = row.value("case", "");
    e.function = row.at("function").get<std::string>();
    e.task = row.at("task").get<std::string>();
    e.status = row.at("status").get<std::string>();
    e.attempts = row.value("attempts", 0);
    e.detail = row.value("detail", "");
    e.scores = row.value("scores", std::map<std::string, double>{});
    r.rows.push_back(std::move(e));
  }
  r.recompute();
  return r;
}

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Pending {
  const BenchCase* c;
  const pseudoc::PseudoFunction* fn;
  const GroundTruth* truth;
  std::optional<promptkit::Prediction> pred;
};

}  // namespace

EvalReport run_benchmark(const std::vector<BenchCase>& dataset, Adapter& adapter, const BenchConfig& cfg) {
  EvalReport report;
  std::vector<Pending> pending;
  std::vector<std::unique_ptr<cgraph::CallGraph>> graphs;
  for (const auto& c : dataset) {
    graphs.push_back(std::make_unique<cgraph::CallGraph>(c.dump));
    const auto& graph = *graphs.back();
    for (const auto& t : c.truth) {
      const auto* fn = graph.function(t.function);
      if (!fn) throw Error(ErrorCode::DatasetError, c.name + ": " + t.function + " did not parse");
      for (const auto& tag : t.tasks.empty() ? cfg.tasks : t.tasks) {
        auto task = promptkit::TaskSpec::parse(tag);
        auto out = adapter.predict(c, graph, t.function, task);
        EvalRow row;
        row.case_name = c.name;
        row.function = t.function;
        row.task = task.tag();
        row.status = std::string(llmgate::to_string(out.status));
        row.attempts = out.attempts;
        row.detail = out.detail;
        report.rows.push_back(std::move(row));
        pending.push_back({&c, fn, &t, out.status == llmgate::RunStatus::Applied ? out.prediction : std::nullopt});
      }
    }
  }

  // Scoring is independent per row; workers take rows round-robin.
  int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(pending.size())));
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < pending.size(); i += workers) {
        if (!pending[i].pred) continue;
        report.rows[i].scores = score_prediction(*pending[i].pred, *pending[i].fn, *pending[i].truth, cfg.clusters,
                                                 cfg.judge);
      }
    }));
  }
  for (auto& j : jobs) j.get();

  report.metadata = cfg.metadata;
  report.metadata["adapter"] = adapter.name();
  if (!report.metadata.contains("timestamp")) report.metadata["timestamp"] = utc_now();
  report.metadata["tasks"] = cfg.tasks;
  report.recompute();
  return report;
}

EvalReport run_benchmark(const fs::path& dataset, Adapter& adapter, const BenchConfig& cfg) {
  auto cases = load_dataset(dataset);
  auto report = run_benchmark(cases, adapter, cfg);
  report.metadata["dataset"] = dataset.string();
  return report;
}

}  // namespace recon::bench
