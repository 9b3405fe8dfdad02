#include "recon/promptkit/response.hpp"

#include <set>

#include "recon/error.hpp"
#include "recon/promptkit/schema.hpp"
#include "recon/pseudoc/identifier.hpp"

namespace recon::promptkit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// End of the balanced object starting at `open`, honouring JSON strings.
std::size_t match_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"') in_str = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

bool strip_suffix(std::string_view& s, std::string_view suffix) {
  if (s.size() < suffix.size() || s.substr(s.size() - suffix.size()) != suffix) return false;
  s.remove_suffix(suffix.size());
  return true;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> json_objects(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string_view::npos) {
    auto end = match_brace(text, i);
    if (end != std::string_view::npos) {
      auto parsed = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) {
        out.emplace_back(i, end);
        i = end;
        continue;
      }
    }
    ++i;
  }
  return out;
}

Prediction parse_response(const TaskSpec& task, std::string_view text) {
  auto objects = json_objects(text);
  if (objects.empty()) throw Error(ErrorCode::FormatError, "no JSON object in response");
  auto [begin, end] = objects.back();
  Prediction p;
  p.task = task;
  p.raw = std::string(text);
  p.payload = nlohmann::json::parse(text.substr(begin, end - begin));

  std::string_view before = trim(text.substr(0, begin));
  if (strip_suffix(before, "```json") || strip_suffix(before, "```")) before = trim(before);
  for (auto tag : {"<Thought>", "<Super-Thought>"}) {
    std::string_view t = tag;
    if (before.substr(0, t.size()) == t) {
      before = trim(before.substr(t.size()));
      std::string close = "</" + std::string(t.substr(1));
      strip_suffix(before, close);
      before = trim(before);
      break;
    }
  }
  p.reasoning = std::string(before);

  auto problems = schema_violations(schema(task.schema_id()), p.payload);
  if (!problems.empty()) {
    std::string msg = task.schema_id() + ":";
    for (const auto& v : problems) msg += " " + v + ";";
    throw Error(ErrorCode::SchemaError, msg);
  }
  return p;
}

std::string render_response(std::string_view reasoning, const nlohmann::json& payload, std::string_view thinking_tag) {
  std::string out(thinking_tag);
  out += "\n";
  out += reasoning;
  out += "\n</" + std::string(thinking_tag.substr(1)) + "\n```json\n";
  out += payload.dump(2);
  out += "\n```\n";
  return out;
}

std::string_view to_string(ViolationCode c) {
  switch (c) {
    case ViolationCode::FormatError: return "FormatError";
    case ViolationCode::SchemaError: return "SchemaError";
    case ViolationCode::UnknownVariable: return "UnknownVariable";
    case ViolationCode::UnknownType: return "UnknownType";
    case ViolationCode::EmptyField: return "EmptyField";
  }
  return "?";
}

void ValidationReport::add(ViolationCode code, std::string detail) {
  violations.push_back({code, std::move(detail)});
  ok = false;
}

ValidationReport validate_prediction(const Prediction& pred, const pseudoc::PseudoFunction& target,
                                     const bench::TypeClusterTable& clusters) {
  using nlohmann::json;
  ValidationReport rep;
  const auto& task = pred.task;
  const json& p = pred.payload;
  for (const auto& v : schema_violations(schema(task.schema_id()), p)) rep.add(ViolationCode::SchemaError, v);
  if (!rep.ok) return rep;

  // Struct names the answer may use: declared in the payload or already
  // spelled in the target's declarations.
  std::set<std::string> declared;
  if (p.contains("structs")) {
    for (const auto& s : p["structs"]) declared.insert(s["name"].get<std::string>());
  }
  auto note_decl = [&](const std::string& t) {
    try {
      declared.insert(bench::parse_type(t).base);
    } catch (const Error&) {
    }
  };
  note_decl(target.return_type);
  for (const auto& v : target.params) note_decl(v.declared_type);
  for (const auto& v : target.locals) note_decl(v.declared_type);

  auto check_name = [&](const json& v, const std::string& where) {
    const auto& name = v.get_ref<const std::string&>();
    if (!pseudoc::is_valid_identifier(name)) rep.add(ViolationCode::FormatError, where + ": invalid identifier '" + name + "'");
  };
  auto check_type = [&](const json& v, const std::string& where) {
    const auto& t = v.get_ref<const std::string&>();
    try {
      auto shape = bench::parse_type(t);
      if (clusters.known(t) || declared.count(shape.base)) return;
      rep.add(ViolationCode::UnknownType, where + ": unknown type '" + t + "'");
    } catch (const Error&) {
      rep.add(ViolationCode::UnknownType, where + ": unparseable type '" + t + "'");
    }
  };
  auto non_empty = [&](const char* key) {
    if (p.contains(key) && trim(p[key].get_ref<const std::string&>()).empty())
      rep.add(ViolationCode::EmptyField, std::string(key) + " is empty");
  };

  if (p.contains("function_name")) check_name(p["function_name"], "function_name");
  if (p.contains("return_type")) check_type(p["return_type"], "return_type");
  if (p.contains("args")) {
    for (std::size_t i = 0; i < p["args"].size(); ++i) {
      std::string where = "args/" + std::to_string(i);
      check_name(p["args"][i]["name"], where);
      check_type(p["args"][i]["type"], where);
    }
  }
  if (p.contains("variables")) {
    bool params_only = task.family == TaskFamily::Args || task.family == TaskFamily::Arg;
    for (std::size_t i = 0; i < p["variables"].size(); ++i) {
      const auto& v = p["variables"][i];
      std::string where = "variables/" + std::to_string(i);
      const auto& old = v["old"].get_ref<const std::string&>();
      const auto* decl = target.find_var(old);
      if (!decl) {
        rep.add(ViolationCode::UnknownVariable, where + ": '" + old + "' not in " + target.name());
      } else if (params_only && decl->kind != pseudoc::VarKind::Param) {
        rep.add(ViolationCode::UnknownVariable, where + ": '" + old + "' is not a parameter");
      } else if (!task.param.empty() && old != task.param) {
        rep.add(ViolationCode::UnknownVariable, where + ": expected '" + task.param + "', got '" + old + "'");
      }
      check_name(v["new_name"], where);
      check_type(v["new_type"], where);
    }
  }
  if (p.contains("structs")) {
    for (std::size_t i = 0; i < p["structs"].size(); ++i) {
      const auto& s = p["structs"][i];
      std::string where = "structs/" + std::to_string(i);
      check_name(s["name"], where);
      long end = 0;
      for (std::size_t m = 0; m < s["members"].size(); ++m) {
        const auto& mem = s["members"][m];
        std::string mw = where + "/members/" + std::to_string(m);
        check_name(mem["name"], mw);
        check_type(mem["type"], mw);
        long off = mem["offset"].get<long>();
        if (off < end) rep.add(ViolationCode::SchemaError, mw + ": overlaps previous member");
        end = off + mem["size"].get<long>();
      }
    }
  }
  for (auto key : {"summary", "category", "algorithm", "code"}) non_empty(key);
  if (task.family == TaskFamily::FuncAnalysis) {
    for (const auto& c : p["comments"]) {
      if (c["line"].get<int>() > target.line_count)
        rep.add(ViolationCode::SchemaError, "comment line " + std::to_string(c["line"].get<int>()) + " past end");
    }
  }
  return rep;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : report.violations) v.push_back({{"code", to_string(x.code)}, {"detail", x.detail}});
  return {{"ok", report.ok}, {"violations", v}};
}

}  // namespace recon::promptkit
