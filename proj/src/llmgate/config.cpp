#include "recon/llmgate/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "recon/error.hpp"

namespace recon::llmgate {

namespace {

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
  const toml::node* node = t.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {  // accepts integers too
      out = *v;
      return;
    }
  } else {
    if (auto v = node->value<int64_t>()) {
      out = static_cast<T>(*v);
      return;
    }
  }
  throw Error(ErrorCode::FormatError, "config key '" + std::string(key) + "' has the wrong type");
}

}  // namespace

LlmConfig parse_config(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "bad TOML at line " << e.source().begin.line << ": " << e.description();
    throw Error(ErrorCode::FormatError, msg.str());
  }
  LlmConfig cfg;
  const toml::table* llm = doc["llm"].as_table();
  if (!llm) return cfg;
  read(*llm, "endpoint", cfg.endpoint);
  read(*llm, "model", cfg.model);
  read(*llm, "temperature", cfg.temperature);
  read(*llm, "max_output_tokens", cfg.max_output_tokens);
  read(*llm, "timeout_seconds", cfg.timeout_seconds);
  read(*llm, "max_retries", cfg.max_retries);
  read(*llm, "api_key_env", cfg.api_key_env);
  read(*llm, "max_in_flight", cfg.max_in_flight);
  read(*llm, "transport", cfg.transport);
  if (const auto* b = (*llm)["backoff"].as_table()) {
    read(*b, "initial_seconds", cfg.backoff_initial);
    read(*b, "factor", cfg.backoff_factor);
    read(*b, "max_seconds", cfg.backoff_max);
  }
  if (const auto* m = (*llm)["mock"].as_table()) {
    read(*m, "failures", cfg.mock_failures);
    read(*m, "chunk_delay_ms", cfg.mock_chunk_delay_ms);
  }
  if (cfg.max_retries < 0 || cfg.max_output_tokens <= 0 || cfg.max_in_flight <= 0)
    throw Error(ErrorCode::FormatError, "config: retries, output tokens and in-flight cap must be positive");
  if (cfg.transport != "http" && cfg.transport != "mock")
    throw Error(ErrorCode::FormatError, "config: unknown transport '" + cfg.transport + "'");
  return cfg;
}

LlmConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json to_json(const LlmConfig& c) {
  return {{"endpoint", c.endpoint},
          {"model", c.model},
          {"temperature", c.temperature},
          {"max_output_tokens", c.max_output_tokens},
          {"timeout_seconds", c.timeout_seconds},
          {"max_retries", c.max_retries},
          {"api_key_env", c.api_key_env},
          {"max_in_flight", c.max_in_flight},
          {"transport", c.transport}};
}

}  // namespace recon::llmgate
