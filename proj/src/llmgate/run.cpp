#include "recon/llmgate/run.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"
#include "recon/llmgate/templates.hpp"

namespace recon::llmgate {

using promptkit::TaskFamily;

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Applied: return "Applied";
    case RunStatus::ExhaustedRetries: return "ExhaustedRetries";
    case RunStatus::TransportFailed: return "TransportFailed";
  }
  return "?";
}

std::vector<dflow::TraceReport> traces_for(const cgraph::CallGraph& graph, const std::string& target,
                                           const promptkit::TaskSpec& task, const cgraph::ContextConfig& ctx) {
  const auto* fn = graph.function(target);
  if (!fn) throw Error(ErrorCode::UnknownFunction, "no pseudo code for '" + target + "'");
  std::vector<dflow::TraceReport> out;
  auto each = [&](const std::vector<pseudoc::VarDecl>& vars) {
    for (const auto& v : vars) out.push_back(dflow::trace_variable(graph, target, v.name, ctx));
  };
  switch (task.family) {
    case TaskFamily::Var:
    case TaskFamily::Arg:
      out.push_back(dflow::trace_variable(graph, target, task.param, ctx));
      break;
    case TaskFamily::Vars:
      each(fn->locals);
      break;
    case TaskFamily::Args:
    case TaskFamily::Signature:
      each(fn->params);
      break;
    case TaskFamily::FuncAnalysis:
      each(fn->params);
      each(fn->locals);
      break;
    default:
      break;
  }
  return out;
}

promptkit::PromptBundle prepare_prompt(const cgraph::CallGraph& graph, const std::string& target,
                                       const promptkit::TaskSpec& task, const RunOptions& opts) {
  auto traces = traces_for(graph, target, task, opts.ctx);
  std::set<std::string> reached;
  for (const auto& t : traces) {
    for (const auto& f : t.functions()) {
      if (f != target) reached.insert(f);
    }
  }
  auto sel = cgraph::select_context(cgraph::collect_context(graph, target, opts.ctx), opts.ctx, reached);
  return promptkit::build_prompt(graph, sel, traces, task, opts.prompt);
}

TaskRun run_task(const cgraph::CallGraph& graph, const std::string& target, const promptkit::TaskSpec& task,
                 LlmClient& client, const RunOptions& opts, const RunObserver& observer) {
  TaskRun run;
  run.prompt = prepare_prompt(graph, target, task, opts);
  const auto* fn = graph.function(target);
  std::vector<Message> messages{{"system", promptkit::system_prompt()}, {"user", run.prompt.text()}};
  int max_attempts = 1 + client.config().max_retries;
  for (int i = 0; i < max_attempts; ++i) {
    if (observer.on_attempt) observer.on_attempt(i);
    Completion reply;
    try {
      reply = client.complete(messages, observer.on_chunk);
    } catch (const Error& e) {
      run.status = RunStatus::TransportFailed;
      run.error = std::string(recon::to_string(e.code())) + ": " + e.what();
      return run;
    }
    AttemptRecord rec;
    rec.raw = reply.content;
    std::string reason;
    try {
      auto pred = promptkit::parse_response(task, reply.content);
      auto report = promptkit::validate_prediction(pred, *fn, opts.clusters);
      if (report.ok) {
        rec.ok = true;
        rec.outcome = "applied";
        run.attempts.push_back(std::move(rec));
        run.final = std::move(pred);
        run.status = RunStatus::Applied;
        return run;
      }
      rec.violations = report.violations;
      for (const auto& v : report.violations) {
        if (!reason.empty()) reason += "; ";
        reason += std::string(promptkit::to_string(v.code)) + ": " + v.detail;
      }
    } catch (const Error& e) {
      reason = std::string(recon::to_string(e.code())) + ": " + e.what();
    }
    rec.outcome = reason;
    run.attempts.push_back(rec);
    messages.push_back({"assistant", reply.content});
    messages.push_back({"user", render_template(prompt_template("retry.v1"), {{"reason", reason}, {"task", task.tag()}})});
  }
  run.status = RunStatus::ExhaustedRetries;
  return run;
}

nlohmann::json to_json(const TaskRun& run) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : run.attempts) attempts.push_back({{"raw", a.raw}, {"ok", a.ok}, {"outcome", a.outcome}});
  nlohmann::json out = {{"status", to_string(run.status)},
                        {"attempts", attempts},
                        {"prompt", promptkit::to_json(run.prompt)}};
  if (run.final) {
    out["final"] = {{"task", run.final->task.tag()}, {"reasoning", run.final->reasoning}, {"payload", run.final->payload}};
  } else {
    out["final"] = nullptr;
  }
  if (!run.error.empty()) out["error"] = run.error;
  return out;
}

namespace {

bool verdict(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::JudgeFormatError, std::string("verdict missing '") + key + "'");
  const auto& v = doc[key];
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "yes" || s == "true" || s == "pass") return true;
    if (s == "no" || s == "false" || s == "fail") return false;
  }
  throw Error(ErrorCode::JudgeFormatError, std::string("verdict '") + key + "' is not yes/no");
}

}  // namespace

JudgeVerdict parse_judge(std::string_view text) {
  auto objects = promptkit::json_objects(text);
  if (objects.empty()) throw Error(ErrorCode::JudgeFormatError, "judge answer has no JSON object");
  auto [b, e] = objects.back();
  auto doc = nlohmann::json::parse(text.substr(b, e - b));
  JudgeVerdict v;
  v.coverage = verdict(doc, "coverage");
  v.accuracy = verdict(doc, "accuracy");
  v.misleading_free = !verdict(doc, "misleading");
  v.readable = verdict(doc, "readability");
  int passed = v.coverage + v.accuracy + v.misleading_free + v.readable;
  v.score = passed / 4.0;
  return v;
}

JudgeVerdict judge_summary(LlmClient& client, std::string_view pseudocode, std::string_view summary,
                           std::optional<std::string_view> reference_source) {
  auto trimmed = summary;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
  if (trimmed.empty()) throw Error(ErrorCode::InvalidArgument, "summary is empty");
  std::string prompt = render_template(prompt_template("judge.v1"),
                                       {{"pseudocode", std::string(pseudocode)},
                                        {"summary", std::string(summary)},
                                        {"reference", reference_source ? std::string(*reference_source) : "(none)"}});
  std::vector<Message> messages{{"user", prompt}};
  std::string last;
  for (int i = 0; i <= client.config().max_retries; ++i) {
    auto reply = client.complete_at(0.0, messages);
    try {
      return parse_judge(reply.content);
    } catch (const Error& e) {
      last = e.what();
    }
  }
  throw Error(ErrorCode::JudgeFormatError, "judge gave no usable verdict: " + last);
}

nlohmann::json to_json(const JudgeVerdict& v) {
  return {{"coverage", v.coverage},
          {"accuracy", v.accuracy},
          {"misleading_free", v.misleading_free},
          {"readable", v.readable},
          {"score", v.score}};
}

}  // namespace recon::llmgate
