#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recon/bench/metrics.hpp"
#include "recon/bench/types.hpp"
#include "recon/cgraph/graph.hpp"
#include "recon/llmgate/run.hpp"
#include "recon/promptkit/response.hpp"
#include "recon/promptkit/task.hpp"

namespace recon::bench {

struct VarTruth {
  std::string pseudo_name;
  std::string true_name;
  std::string true_type;
};

struct GroundTruth {
  std::string function;  // key into the case's dump
  std::string true_name;
  std::vector<VarTruth> vars;
  std::vector<StructLayout> structs;
  std::string source_code;
  std::optional<std::string> reference_summary;
  std::vector<std::string> tasks;  // task tags to run; empty = BenchConfig::tasks
};

void to_json(nlohmann::json& j, const GroundTruth& t);
void from_json(const nlohmann::json& j, GroundTruth& t);

/// One dataset directory: `dump.jsonl` plus `truth.json`
/// ({"functions": [GroundTruth...]}).
struct BenchCase {
  std::string name;
  std::filesystem::path dir;
  pseudoc::DecompDump dump;
  std::vector<GroundTruth> truth;
};

/// Throws Error(DatasetError) when either file is missing, a truth entry
/// names a function absent from the dump, or a pseudo_name is not declared
/// in its function.
BenchCase load_case(const std::filesystem::path& dir);

/// Every sub-directory holding a dump.jsonl, sorted by name; the directory
/// itself when it is a case.
std::vector<BenchCase> load_dataset(const std::filesystem::path& root);

struct AdapterOutput {
  llmgate::RunStatus status = llmgate::RunStatus::ExhaustedRetries;
  std::optional<promptkit::Prediction> prediction;
  int attempts = 0;
  std::string detail;
};

class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::string name() const = 0;
  virtual AdapterOutput predict(const BenchCase& c, const cgraph::CallGraph& graph, const std::string& function,
                                const promptkit::TaskSpec& task) = 0;
};

/// Recorded answers from `<case>/replay.jsonl`, one object per line:
///   {"function": str, "task": tag, "responses": [raw answer, ...]}
/// Answers are checked like live ones (parse, validate) and tried in order,
/// at most 1 + max_retries of them. A pair with no record fails.
class ReplayAdapter : public Adapter {
 public:
  explicit ReplayAdapter(int max_retries = 3, TypeClusterTable clusters = TypeClusterTable::defaults());
  std::string name() const override { return "replay"; }
  AdapterOutput predict(const BenchCase& c, const cgraph::CallGraph& graph, const std::string& function,
                        const promptkit::TaskSpec& task) override;

 private:
  const std::map<std::pair<std::string, std::string>, std::vector<std::string>>& records(const BenchCase& c);

  int max_retries_;
  TypeClusterTable clusters_;
  std::map<std::string, std::map<std::pair<std::string, std::string>, std::vector<std::string>>> cache_;
};

/// Live model through llmgate::run_task.
class ModelAdapter : public Adapter {
 public:
  ModelAdapter(llmgate::LlmClient& client, llmgate::RunOptions opts = {}) : client_(client), opts_(std::move(opts)) {}
  std::string name() const override { return "recopilot"; }
  AdapterOutput predict(const BenchCase& c, const cgraph::CallGraph& graph, const std::string& function,
                        const promptkit::TaskSpec& task) override;

 private:
  llmgate::LlmClient& client_;
  llmgate::RunOptions opts_;
};

/// Summary score in [0, 1] for one prediction.
using JudgeFn = std::function<double(const pseudoc::PseudoFunction& fn, std::string_view summary,
                                     const GroundTruth& truth)>;

/// judge_summary against `client`, with the ground-truth source as reference.
JudgeFn model_judge(llmgate::LlmClient& client);

// Metric keys, in report column order.
inline constexpr const char* kMetrics[] = {"func_name", "var_name", "var_type", "struct", "dec", "sum"};

/// Scores one applied prediction. Metrics that do not apply to the task (or
/// have nothing to compare against) are absent from the result.
std::map<std::string, double> score_prediction(const promptkit::Prediction& pred, const pseudoc::PseudoFunction& fn,
                                               const GroundTruth& truth, const TypeClusterTable& clusters,
                                               const JudgeFn& judge = {});

struct EvalRow {
  std::string case_name;
  std::string function;
  std::string task;
  std::string status;  // llmgate::to_string(RunStatus)
  int attempts = 0;
  std::string detail;
  std::map<std::string, double> scores;

  bool applied() const { return status == "Applied"; }
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  nlohmann::json metadata;  // adapter, model, config, timestamp, dataset
  std::vector<EvalRow> rows;
  std::map<std::string, double> aggregates;  // metric -> mean x 100 over applied rows
  double success_ratio = 0;
  int runs = 0;
  int applied = 0;

  /// Recomputes aggregates, counts and success ratio from `rows`.
  void recompute();
  nlohmann::json to_json() const;
  /// Reads a report; aggregates are recomputed from the rows.
  static EvalReport from_json(const nlohmann::json& j);
};

struct BenchConfig {
  std::vector<std::string> tasks{"<funcname>", "<vars>", "<args>", "<decompilation>", "<summary-en>"};
  TypeClusterTable clusters = TypeClusterTable::defaults();
  JudgeFn judge;    // unset: summaries are not scored
  int threads = 4;  // scoring workers
  nlohmann::json metadata = nlohmann::json::object();
};

EvalReport run_benchmark(const std::vector<BenchCase>& dataset, Adapter& adapter, const BenchConfig& cfg = {});
EvalReport run_benchmark(const std::filesystem::path& dataset, Adapter& adapter, const BenchConfig& cfg = {});

}  // namespace recon::bench
