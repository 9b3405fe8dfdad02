#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "recon/cgraph/graph.hpp"
#include "recon/llmgate/run.hpp"
#include "recon/llmgate/transport.hpp"

namespace recon::server {

// Schema tags of the versioned JSON bodies.
inline constexpr const char* kProjectSchema = "recon.project.v1";
inline constexpr const char* kFunctionsSchema = "recon.functions.v1";
inline constexpr const char* kFunctionSchema = "recon.function.v1";
inline constexpr const char* kContextSchema = "recon.context.v1";
inline constexpr const char* kRunSchema = "recon.run.v1";
inline constexpr const char* kApplySchema = "recon.apply.v1";
inline constexpr const char* kOverlaySchema = "recon.overlay.v1";
inline constexpr const char* kAuditSchema = "recon.audit.v1";
inline constexpr const char* kReportSchema = "recon.report.v1";
inline constexpr const char* kErrorSchema = "recon.error.v1";

/// New name and/or type for one symbol. Empty fields are left alone.
struct SymbolEdit {
  std::string new_name;
  std::string new_type;

  bool operator==(const SymbolEdit&) const = default;
};

/// Rename overlay keyed by original names: function -> symbol -> edit. The
/// symbol kFunctionSymbol stands for the function itself.
inline constexpr const char* kFunctionSymbol = "<function>";
using Overlay = std::map<std::string, std::map<std::string, SymbolEdit>>;

nlohmann::json to_json(const Overlay& overlay);

/// One accepted item of a prediction.
struct ApplyItem {
  std::string id;        // "function" or "var:<original name>"
  std::string function;  // original function name
  std::string symbol;    // kFunctionSymbol or original variable name
  SymbolEdit edit;
};

struct AuditEntry {
  int seq = 0;  // 1-based, equals the overlay revision after the entry
  std::string run_id;
  std::vector<ApplyItem> items;
  std::string at;  // UTC timestamp
};

nlohmann::json to_json(const AuditEntry& e);
AuditEntry audit_from_json(const nlohmann::json& j);

/// Folds audit entries into an overlay. Applying an item twice changes nothing.
Overlay replay(const std::vector<AuditEntry>& log);
void apply_items(Overlay& overlay, const std::vector<ApplyItem>& items);

/// Pseudo code of `fn` with the overlay applied: renamed identifiers
/// (including calls to renamed functions) and retyped declarations.
std::string render_with_overlay(const pseudoc::PseudoFunction& fn, const Overlay& overlay);

/// Items a prediction offers for application.
std::vector<ApplyItem> prediction_items(const pseudoc::PseudoFunction& fn, const promptkit::Prediction& pred);

enum class RunState { Queued, Running, Applied, ExhaustedRetries, TransportFailed, Failed };

std::string_view to_string(RunState s);
bool is_terminal(RunState s);

/// Picks the LLM client for a model name given in a run request.
using ModelResolver = std::function<std::shared_ptr<llmgate::LlmClient>(const std::string& model)>;

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::filesystem::path configs_dir;  // <model>.toml; "mock" always resolves
  int workers = 4;                    // concurrent task runs
  ModelResolver resolver;             // overrides configs_dir lookup
  llmgate::RunOptions run_options;
};

/// HTTP-independent core: projects, runs, overlays and reports over a
/// single-directory file store. Thread safe. Every method returns the JSON
/// body of the matching endpoint and throws ApiError on request errors.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
};

class Service {
 public:
  explicit Service(ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  nlohmann::json create_project(std::string_view dump_jsonl);
  nlohmann::json get_project(const std::string& id) const;
  nlohmann::json list_functions(const std::string& id) const;
  nlohmann::json function_view(const std::string& id, const std::string& fn) const;
  nlohmann::json preview_context(const std::string& id, const std::string& fn, std::optional<int> depth,
                                 std::optional<int> k) const;

  nlohmann::json launch_run(const std::string& id, const std::string& fn, const nlohmann::json& body);
  /// Run record; `from` trims the reasoning to the part after that offset.
  nlohmann::json get_run(const std::string& run_id, std::size_t from = 0) const;
  /// Blocks until the reasoning grows past `from`, the run ends or the
  /// timeout passes. Returns the new text and whether the run is terminal.
  std::pair<std::string, bool> wait_run(const std::string& run_id, std::size_t from, double timeout_seconds) const;
  /// Blocks until the run is terminal.
  nlohmann::json wait_terminal(const std::string& run_id, double timeout_seconds = 60) const;

  nlohmann::json apply(const std::string& run_id, const nlohmann::json& body);
  nlohmann::json overlay(const std::string& id) const;
  nlohmann::json audit(const std::string& id) const;

  nlohmann::json create_report(const nlohmann::json& body);
  nlohmann::json get_report(const std::string& id) const;

  const ServiceOptions& options() const { return opts_; }

 private:
  struct Project;
  struct Run;

  std::shared_ptr<Project> project(const std::string& id) const;
  std::shared_ptr<Run> run(const std::string& id) const;
  std::shared_ptr<llmgate::LlmClient> client(const std::string& model);
  void worker_loop();
  void execute(const std::shared_ptr<Run>& r);
  void finish(const std::shared_ptr<Run>& r, RunState state);
  nlohmann::json run_json(const Run& r, std::size_t from) const;
  void load_store();
  std::string new_id(const char* prefix);

  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Project>> projects_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::map<std::string, std::shared_ptr<llmgate::LlmClient>> clients_;
  std::mutex store_mu_;  // runs.jsonl appends

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::shared_ptr<Run>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// REST front end. Routes:
///   POST /projects                                   body: dump JSONL
///   GET  /projects/{id}
///   GET  /projects/{id}/functions
///   GET  /projects/{id}/functions/{f}                overlay applied
///   GET  /projects/{id}/functions/{f}/context?depth&k
///   POST /projects/{id}/functions/{f}/runs           {task, model}
///   GET  /projects/{id}/overlay, /projects/{id}/audit
///   GET  /runs/{id}?from=N
///   GET  /runs/{id}/stream?from=N                    server-sent events
///   POST /runs/{id}/apply                            {accept, base_revision?}
///   POST /reports                                    {dataset, adapter, model?}
///   GET  /reports/{id}
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace recon::server
