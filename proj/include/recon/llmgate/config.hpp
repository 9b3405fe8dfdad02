#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace recon::llmgate {

struct LlmConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "recopilot";
  double temperature = 0.0;
  int max_output_tokens = 16384;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::string api_key_env = "RECON_API_KEY";
  int max_in_flight = 4;
  double backoff_initial = 0.5;  // seconds
  double backoff_factor = 2.0;
  double backoff_max = 8.0;

  // "http" talks to `endpoint`; "mock" answers locally (see MockModelTransport).
  std::string transport = "http";
  int mock_failures = 0;        // malformed answers before a good one
  int mock_chunk_delay_ms = 0;  // pause between streamed chunks
};

/// Reads the [llm] table (and [llm.backoff], [llm.mock]) of a TOML document.
/// Missing keys keep their defaults. Throws Error(FormatError) on bad TOML
/// or mistyped values.
LlmConfig parse_config(std::string_view toml_text);
LlmConfig load_config(const std::string& path);

nlohmann::json to_json(const LlmConfig& cfg);

}  // namespace recon::llmgate
