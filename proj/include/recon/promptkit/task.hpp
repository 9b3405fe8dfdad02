#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::promptkit {

enum class TaskFamily {
  FuncName,
  Signature,
  Vars,
  Args,
  Var,
  Arg,
  Algorithm,
  Category,
  SummaryBriefEn,
  SummaryBriefCn,
  SummaryEn,
  SummaryCn,
  FuncAnalysis,
  Decompilation,
};

const std::vector<TaskFamily>& all_families();

struct TaskSpec {
  TaskFamily family = TaskFamily::FuncName;
  std::string param;  // variable name for <var:NAME> / <arg:NAME>
  std::optional<std::string> step_guide;

  /// Literal tag line, e.g. "<var:v3>".
  std::string tag() const;
  /// Schema identifier, e.g. "vars.v1".
  std::string schema_id() const;
  bool is_summary() const;
  bool renames_variables() const;

  /// Accepts "<funcname>", "funcname", "<arg:a1>", "arg:a1".
  static TaskSpec parse(std::string_view tag);
};

std::string family_name(TaskFamily f);

/// A payload that satisfies the task's schema, used by tests and the mock
/// model. `target_var` fills the single-entry forms.
nlohmann::json golden_example(const TaskSpec& task, const std::string& target_var = "v1");

}  // namespace recon::promptkit
