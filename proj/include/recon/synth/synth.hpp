#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recon/cgraph/graph.hpp"
#include "recon/llmgate/run.hpp"
#include "recon/llmgate/transport.hpp"
#include "recon/promptkit/task.hpp"

namespace recon::synth {

/// Input, answer without reasoning, source and meta for one training sample.
struct RawSftRecord {
  std::string key;     // unique; resume skips keys already written
  std::string task;    // tag, e.g. "<funcname>"
  std::string prompt;  // rendered task prompt
  nlohmann::json answer;
  std::string source_code;
  nlohmann::json meta = nlohmann::json::object();  // file, project, ...
};

/// Throws Error(SchemaError) when the answer does not fit the task schema.
void check_raw(const RawSftRecord& raw);
void to_json(nlohmann::json& j, const RawSftRecord& r);
void from_json(const nlohmann::json& j, RawSftRecord& r);

/// Prompt from the analysis pipeline (context, traces) for `target`.
RawSftRecord make_raw_record(const cgraph::CallGraph& graph, const std::string& target, const std::string& task,
                             nlohmann::json answer, std::string source_code, nlohmann::json meta = {});

enum class CotMode { Standard, Super };

std::string_view to_string(CotMode m);

struct AttemptLog {
  std::string response;  // generator output
  std::string cot;       // extracted, empty on a format failure
  std::string outcome;   // "accepted" or why it was rejected
};

struct SftRecord {
  std::string key;
  std::string task;
  std::string prompt;
  std::string cot;
  nlohmann::json answer;
  CotMode mode = CotMode::Standard;
  std::vector<AttemptLog> provenance;

  /// Training response: thinking block plus the answer JSON.
  std::string response() const;
};

void to_json(nlohmann::json& j, const SftRecord& r);

struct DpoPair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
};

void to_json(nlohmann::json& j, const DpoPair& p);

/// Expert-written steps for one task family.
struct StepGuide {
  std::string task;
  std::string standard;            // guide for single-shot generation
  std::vector<std::string> steps;  // Super-CoT steps, in order

  /// TOML: task = "...", standard = "...", steps = ["...", ...]
  static StepGuide parse(std::string_view toml_text);
  static StepGuide load(const std::filesystem::path& path);
};

/// Text between <cot> and </cot>, trimmed. Throws Error(GenFormatError)
/// when the markers are missing or the block is empty.
std::string extract_cot(std::string_view response);

/// One generator call; returns the raw response with its CoT.
struct Generation {
  std::string response;
  std::string cot;
};
Generation generate(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client);
std::string generate_cot(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client);

struct Verdict {
  bool correct = false;
  bool consistent = false;
  bool helpful = false;
  bool pure = false;
  bool accept = false;
};

/// Reads the four yes/no verdicts. Throws Error(JudgeFormatError).
Verdict parse_verdict(std::string_view text);

/// Discriminator call; malformed verdicts are re-asked up to max_retries
/// times, then JudgeFormatError propagates.
Verdict discriminate(const RawSftRecord& raw, std::string_view cot, llmgate::LlmClient& client);

struct PurityReport {
  bool pure = true;
  std::vector<std::string> leaks;  // quoted identifiers and source lines
};

/// Text after a line starting with "Conclusion" (optionally as a markdown
/// heading) is exempt.
inline constexpr std::size_t kMinLeakIdentifier = 6;
inline constexpr std::size_t kMinLeakLine = 20;

/// Deterministic leak detector: ground-truth identifiers (function_name,
/// new_name and name fields, at least 6 chars) or normalized source lines
/// (at least 20 chars) quoted before the conclusion.
PurityReport purity_scan(std::string_view cot, const nlohmann::json& answer, std::string_view source);
bool purity_check(std::string_view cot, const nlohmann::json& answer, std::string_view source);

struct SftResult {
  SftRecord record;
  std::vector<DpoPair> dpo;  // (rejected attempt, accepted attempt), one per earlier attempt
};

/// generate -> purity_check -> discriminate until one CoT is accepted.
/// Throws Error(ExhaustedAttempts) when none of `max_attempts` is.
SftResult build_sft_record(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client,
                           int max_attempts = 3);

/// Stepwise Super-CoT. Any rejected step (format, purity or verdict)
/// throws StepRejected with its 1-based index and nothing is emitted.
SftRecord build_super_cot(const RawSftRecord& raw, const StepGuide& guide, llmgate::LlmClient& client);

struct PipelineOptions {
  CotMode mode = CotMode::Standard;
  StepGuide guide;
  std::filesystem::path out_dir;
  int max_attempts = 3;
  int workers = 4;
  int shards = 8;
};

struct PipelineStats {
  int total = 0;
  int skipped = 0;  // already in the output directory
  int accepted = 0;
  int rejected = 0;
  int dpo_pairs = 0;
  double accept_rate = 0;      // accepted / processed this run
  double mean_cot_tokens = 0;  // ~4 chars per token

  nlohmann::json to_json() const;
};

/// Shard of a record key, stable across runs.
int shard_of(std::string_view key, int shards);

/// Writes sft-NNNNN.jsonl, dpo-NNNNN.jsonl and log-NNNNN.jsonl under
/// out_dir. Each shard has one writer. Keys already present in a log
/// shard are skipped, so an interrupted run can be resumed.
PipelineStats run_pipeline(const std::vector<RawSftRecord>& raws, const PipelineOptions& opts,
                           llmgate::LlmClient& client);

std::vector<RawSftRecord> load_raw(const std::filesystem::path& jsonl);

}  // namespace recon::synth
