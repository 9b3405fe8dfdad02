#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "recon/llmgate/config.hpp"

namespace recon::llmgate {

struct Message {
  std::string role;
  std::string content;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct Completion {
  std::string content;
  Usage usage;
};

using ChunkFn = std::function<void(std::string_view)>;

/// One chat-completion round trip without retries. Implementations throw
/// Error(Timeout), HttpError, Error(AuthError) or Error(TransportError).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Completion send(const LlmConfig& cfg, const std::vector<Message>& messages, const ChunkFn& on_chunk) = 0;
};

/// POSTs {model, messages, max_tokens, temperature} to cfg.endpoint. With a
/// chunk callback the request asks for server-sent events and forwards each
/// content delta.
class HttpTransport : public Transport {
 public:
  Completion send(const LlmConfig& cfg, const std::vector<Message>& messages, const ChunkFn& on_chunk) override;
};

/// Plays back a fixed list of outcomes, then repeats the last one.
class ScriptedTransport : public Transport {
 public:
  struct Step {
    std::string content;
    int status = 200;  // 401/403 -> AuthError, other non-200 -> HttpError
    bool timeout = false;
  };
  explicit ScriptedTransport(std::vector<Step> steps);
  static std::shared_ptr<ScriptedTransport> replies(const std::vector<std::string>& contents);

  Completion send(const LlmConfig& cfg, const std::vector<Message>& messages, const ChunkFn& on_chunk) override;
  int calls() const { return calls_.load(); }
  std::vector<std::vector<Message>> requests() const;

 private:
  std::vector<Step> steps_;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<std::vector<Message>> requests_;
};

/// Wraps a callable; handy for fuzzing.
class FunctionTransport : public Transport {
 public:
  using Fn = std::function<Completion(const std::vector<Message>&)>;
  explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
  Completion send(const LlmConfig&, const std::vector<Message>& messages, const ChunkFn& on_chunk) override;

 private:
  Fn fn_;
};

/// Deterministic local stand-in for a model. Task prompts get a reasoning
/// paragraph plus a schema-valid answer built from the target function;
/// judge and discriminator prompts get all-yes verdicts; generator prompts
/// get a <cot> block. The first `failures` answers of every conversation
/// carry no JSON.
class MockModelTransport : public Transport {
 public:
  MockModelTransport(int failures = 0, int chunk_delay_ms = 0) : failures_(failures), delay_ms_(chunk_delay_ms) {}
  Completion send(const LlmConfig& cfg, const std::vector<Message>& messages, const ChunkFn& on_chunk) override;
  static std::string answer(const std::vector<Message>& messages, int failures);

 private:
  int failures_;
  int delay_ms_;
};

std::shared_ptr<Transport> make_transport(const LlmConfig& cfg);

/// Retrying client. Transport failures (timeouts, connection errors, 429 and
/// 5xx) are retried with exponential backoff up to cfg.max_retries; auth and
/// other 4xx errors are not. Concurrent calls are capped at max_in_flight.
class LlmClient {
 public:
  using Sleeper = std::function<void(double seconds)>;

  LlmClient(LlmConfig cfg, std::shared_ptr<Transport> transport, Sleeper sleeper = {});
  explicit LlmClient(LlmConfig cfg) : LlmClient(cfg, make_transport(cfg)) {}

  Completion complete(const std::vector<Message>& messages, const ChunkFn& on_chunk = {});
  /// Same transport and cap, different sampling temperature.
  Completion complete_at(double temperature, const std::vector<Message>& messages, const ChunkFn& on_chunk = {});

  const LlmConfig& config() const { return cfg_; }
  int transport_attempts() const { return attempts_.load(); }

 private:
  LlmConfig cfg_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleep_;
  std::atomic<int> attempts_{0};
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

/// One retried round trip with a transport made from `cfg`.
Completion complete(const LlmConfig& cfg, const std::vector<Message>& messages);

}  // namespace recon::llmgate
