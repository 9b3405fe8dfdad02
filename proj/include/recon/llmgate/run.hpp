#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recon/bench/types.hpp"
#include "recon/cgraph/context.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/llmgate/transport.hpp"
#include "recon/promptkit/prompt.hpp"
#include "recon/promptkit/response.hpp"

namespace recon::llmgate {

enum class RunStatus { Applied, ExhaustedRetries, TransportFailed };

std::string_view to_string(RunStatus s);

struct AttemptRecord {
  std::string raw;
  bool ok = false;
  std::string outcome;  // "applied" or "<Code>: detail"
  std::vector<promptkit::Violation> violations;
};

struct TaskRun {
  promptkit::PromptBundle prompt;
  std::vector<AttemptRecord> attempts;
  std::optional<promptkit::Prediction> final;
  RunStatus status = RunStatus::ExhaustedRetries;
  std::string error;  // transport failure message
};

struct RunOptions {
  cgraph::ContextConfig ctx;
  promptkit::PromptOptions prompt;
  bench::TypeClusterTable clusters = bench::TypeClusterTable::defaults();
};

struct RunObserver {
  std::function<void(int attempt)> on_attempt;  // 0-based, before each request
  ChunkFn on_chunk;
};

/// Variables traced for a task: the named one for <var:>/<arg:>, locals for
/// <vars>, parameters for <args>/<signature>, everything for
/// <func-analysis>, none otherwise.
std::vector<dflow::TraceReport> traces_for(const cgraph::CallGraph& graph, const std::string& target,
                                           const promptkit::TaskSpec& task, const cgraph::ContextConfig& ctx);

/// Context selection, traces and prompt for one task.
promptkit::PromptBundle prepare_prompt(const cgraph::CallGraph& graph, const std::string& target,
                                       const promptkit::TaskSpec& task, const RunOptions& opts);

/// Builds the prompt, asks the model and re-asks on any format, schema or
/// validation failure, at most client.config().max_retries times.
TaskRun run_task(const cgraph::CallGraph& graph, const std::string& target, const promptkit::TaskSpec& task,
                 LlmClient& client, const RunOptions& opts = {}, const RunObserver& observer = {});

nlohmann::json to_json(const TaskRun& run);

struct JudgeVerdict {
  bool coverage = false;
  bool accuracy = false;
  bool misleading_free = false;
  bool readable = false;
  double score = 0.0;
};

/// Reads the four verdicts from a judge answer. Throws
/// Error(JudgeFormatError) when they are missing or not yes/no.
JudgeVerdict parse_judge(std::string_view text);

/// One judge call at temperature 0 with the frozen rubric, retried on
/// malformed verdicts.
JudgeVerdict judge_summary(LlmClient& client, std::string_view pseudocode, std::string_view summary,
                           std::optional<std::string_view> reference_source = std::nullopt);

nlohmann::json to_json(const JudgeVerdict& v);

}  // namespace recon::llmgate
