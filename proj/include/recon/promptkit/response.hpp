#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recon/bench/types.hpp"
#include "recon/promptkit/task.hpp"
#include "recon/pseudoc/function.hpp"

namespace recon::promptkit {

struct Prediction {
  TaskSpec task;
  std::string reasoning;
  nlohmann::json payload;
  std::string raw;
};

/// Splits a model answer into reasoning and the last well-formed JSON
/// object. Throws Error(FormatError) when there is no object and
/// Error(SchemaError) when it does not fit the task's schema.
Prediction parse_response(const TaskSpec& task, std::string_view text);

/// The answer layout parse_response expects.
std::string render_response(std::string_view reasoning, const nlohmann::json& payload,
                            std::string_view thinking_tag = "<Thought>");

enum class ViolationCode { FormatError, SchemaError, UnknownVariable, UnknownType, EmptyField };

std::string_view to_string(ViolationCode c);

struct Violation {
  ViolationCode code;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;

  void add(ViolationCode code, std::string detail);
};

/// Checks that renamed variables exist, names are C identifiers, types
/// parse to known or declared types and text fields are non-empty.
ValidationReport validate_prediction(const Prediction& pred, const pseudoc::PseudoFunction& target,
                                     const bench::TypeClusterTable& clusters);

/// [begin, end) of every top-level balanced {...} that parses as JSON.
std::vector<std::pair<std::size_t, std::size_t>> json_objects(std::string_view text);

nlohmann::json to_json(const ValidationReport& report);

}  // namespace recon::promptkit
