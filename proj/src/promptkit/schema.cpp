#include "recon/promptkit/schema.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"

namespace recon::promptkit {

namespace {

struct Embedded {
  const char* id;
  const char* text;
};

constexpr Embedded kSchemas[] = {
#include "schemas.inc"
};

const std::map<std::string, nlohmann::json, std::less<>>& registry() {
  static const auto reg = [] {
    std::map<std::string, nlohmann::json, std::less<>> out;
    for (const auto& e : kSchemas) out.emplace(e.id, nlohmann::json::parse(e.text));
    return out;
  }();
  return reg;
}

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

void check(const nlohmann::json& s, const nlohmann::json& v, const std::string& ptr, std::vector<std::string>& out) {
  auto at = [&](const std::string& msg) { out.push_back((ptr.empty() ? "/" : ptr) + ": " + msg); };
  if (auto t = s.find("type"); t != s.end() && !has_type(v, t->get<std::string>())) {
    at("expected " + t->get<std::string>());
    return;
  }
  if (v.is_object()) {
    if (auto req = s.find("required"); req != s.end()) {
      for (const auto& r : *req) {
        if (!v.contains(r.get<std::string>())) at("missing '" + r.get<std::string>() + "'");
      }
    }
    if (auto props = s.find("properties"); props != s.end()) {
      for (const auto& [key, sub] : props->items()) {
        if (auto it = v.find(key); it != v.end()) check(sub, *it, ptr + "/" + key, out);
      }
    }
  }
  if (v.is_array()) {
    if (auto mn = s.find("minItems"); mn != s.end() && v.size() < mn->get<std::size_t>()) at("too few items");
    if (auto mx = s.find("maxItems"); mx != s.end() && v.size() > mx->get<std::size_t>()) at("too many items");
    if (auto items = s.find("items"); items != s.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) check(*items, v[i], ptr + "/" + std::to_string(i), out);
    }
  }
  if (v.is_string()) {
    if (auto mn = s.find("minLength"); mn != s.end() && v.get_ref<const std::string&>().size() < mn->get<std::size_t>())
      at("string too short");
  }
  if (v.is_number()) {
    double d = v.get<double>();
    if (auto mn = s.find("minimum"); mn != s.end() && d < mn->get<double>()) at("below minimum");
    if (auto mx = s.find("maximum"); mx != s.end() && d > mx->get<double>()) at("above maximum");
  }
}

}  // namespace

std::vector<std::string> schema_ids() {
  std::vector<std::string> out;
  for (const auto& [id, _] : registry()) out.push_back(id);
  return out;
}

const nlohmann::json& schema(std::string_view id) {
  auto it = registry().find(id);
  if (it == registry().end()) throw Error(ErrorCode::InvalidArgument, "unknown schema '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> schema_violations(const nlohmann::json& s, const nlohmann::json& value) {
  std::vector<std::string> out;
  check(s, value, "", out);
  return out;
}

}  // namespace recon::promptkit
