#include "recon/promptkit/task.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"

namespace recon::promptkit {

namespace {

struct FamilyInfo {
  TaskFamily family;
  const char* name;
  const char* schema;
};

constexpr FamilyInfo kFamilies[] = {
    {TaskFamily::FuncName, "funcname", "funcname.v1"},
    {TaskFamily::Signature, "signature", "signature.v1"},
    {TaskFamily::Vars, "vars", "vars.v1"},
    {TaskFamily::Args, "args", "vars.v1"},
    {TaskFamily::Var, "var", "var.v1"},
    {TaskFamily::Arg, "arg", "var.v1"},
    {TaskFamily::Algorithm, "algorithm", "algorithm.v1"},
    {TaskFamily::Category, "category", "category.v1"},
    {TaskFamily::SummaryBriefEn, "summary-brief-en", "summary.v1"},
    {TaskFamily::SummaryBriefCn, "summary-brief-cn", "summary.v1"},
    {TaskFamily::SummaryEn, "summary-en", "summary.v1"},
    {TaskFamily::SummaryCn, "summary-cn", "summary.v1"},
    {TaskFamily::FuncAnalysis, "func-analysis", "func-analysis.v1"},
    {TaskFamily::Decompilation, "decompilation", "decompilation.v1"},
};

const FamilyInfo& info(TaskFamily f) {
  for (const auto& i : kFamilies) {
    if (i.family == f) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown task family");
}

}  // namespace

const std::vector<TaskFamily>& all_families() {
  static const std::vector<TaskFamily> families = [] {
    std::vector<TaskFamily> out;
    for (const auto& i : kFamilies) out.push_back(i.family);
    return out;
  }();
  return families;
}

std::string family_name(TaskFamily f) { return info(f).name; }

std::string TaskSpec::tag() const {
  if (family == TaskFamily::Var || family == TaskFamily::Arg) return "<" + family_name(family) + ":" + param + ">";
  return "<" + family_name(family) + ">";
}

std::string TaskSpec::schema_id() const { return info(family).schema; }

bool TaskSpec::is_summary() const {
  return family == TaskFamily::SummaryBriefEn || family == TaskFamily::SummaryBriefCn ||
         family == TaskFamily::SummaryEn || family == TaskFamily::SummaryCn;
}

bool TaskSpec::renames_variables() const {
  return family == TaskFamily::Vars || family == TaskFamily::Args || family == TaskFamily::Var ||
         family == TaskFamily::Arg || family == TaskFamily::FuncAnalysis;
}

TaskSpec TaskSpec::parse(std::string_view tag) {
  std::string_view body = tag;
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);
  if (body.size() >= 2 && body.front() == '<' && body.back() == '>') body = body.substr(1, body.size() - 2);
  std::string_view name = body, param;
  if (auto colon = body.find(':'); colon != std::string_view::npos) {
    name = body.substr(0, colon);
    param = body.substr(colon + 1);
  }
  for (const auto& i : kFamilies) {
    if (name != i.name) continue;
    TaskSpec spec;
    spec.family = i.family;
    bool wants_param = i.family == TaskFamily::Var || i.family == TaskFamily::Arg;
    if (wants_param != !param.empty())
      throw Error(ErrorCode::InvalidArgument, "bad task tag '" + std::string(tag) + "'");
    spec.param = std::string(param);
    return spec;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown task tag '" + std::string(tag) + "'");
}

nlohmann::json golden_example(const TaskSpec& task, const std::string& target_var) {
  using nlohmann::json;
  json rename = {{"old", task.param.empty() ? target_var : task.param}, {"new_name", "key_schedule"},
                 {"new_type", "uint8_t *"}};
  switch (task.family) {
    case TaskFamily::FuncName:
      return {{"function_name", "aes_cbc_encrypt"}};
    case TaskFamily::Signature:
      return {{"return_type", "void"},
              {"function_name", "aes_cbc_encrypt"},
              {"args", json::array({{{"name", "ctx"}, {"type", "uint8_t *"}}})}};
    case TaskFamily::Vars:
    case TaskFamily::Args:
    case TaskFamily::Var:
    case TaskFamily::Arg:
      return {{"variables", json::array({rename})}};
    case TaskFamily::Algorithm:
      return {{"algorithm", "AES-128-CBC"}, {"confidence", 0.8}};
    case TaskFamily::Category:
      return {{"category", "cryptography"}};
    case TaskFamily::SummaryBriefEn:
    case TaskFamily::SummaryEn:
      return {{"summary", "Encrypts a buffer in CBC mode."}};
    case TaskFamily::SummaryBriefCn:
    case TaskFamily::SummaryCn:
      return {{"summary", "以 CBC 模式加密缓冲区。"}};
    case TaskFamily::FuncAnalysis:
      return {{"function_name", "aes_cbc_encrypt"},
              {"summary", "Encrypts a buffer in CBC mode."},
              {"variables", json::array({rename})},
              {"comments", json::array({{{"line", 1}, {"text", "entry"}}})}};
    case TaskFamily::Decompilation:
      return {{"code", "void aes_cbc_encrypt(void) {}"}};
  }
  return json::object();
}

}  // namespace recon::promptkit
