#include "recon/bench/types.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"

namespace recon::bench {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_qualifier(std::string_view w) {
  return w == "const" || w == "volatile" || w == "restrict" || w == "__restrict" ||
         w == "__ptr32" || w == "__ptr64" || w == "__unaligned";
}

[[noreturn]] void bad(std::string_view type, const char* why) {
  throw Error(ErrorCode::UnknownType, "not a type: '" + std::string(type) + "' (" + why + ")");
}

// Drops signedness and the redundant trailing "int" of short/long forms.
std::string canonical_base(std::vector<std::string> words) {
  std::vector<std::string> kept;
  bool had_sign = false;
  for (auto& w : words) {
    if (w == "signed" || w == "unsigned") {
      had_sign = true;
      continue;
    }
    kept.push_back(std::move(w));
  }
  if (kept.size() > 1 && kept.back() == "int" && (kept.front() == "short" || kept.front() == "long")) kept.pop_back();
  if (kept.empty()) return had_sign ? "int" : "";
  std::string out;
  for (const auto& w : kept) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

TypeShape parse_type(std::string_view type) {
  TypeShape shape;
  std::vector<std::string> words;
  std::size_t i = 0;
  bool in_suffix = false;
  while (i < type.size()) {
    char c = type[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (ident_start(c)) {
      std::size_t j = i;
      while (j < type.size() && ident_char(type[j])) ++j;
      std::string w(type.substr(i, j - i));
      i = j;
      if (is_qualifier(w)) continue;
      if (in_suffix || shape.pointer_depth > 0) bad(type, "name after declarator");
      if (w == "struct" || w == "union" || w == "enum") {
        if (!words.empty() || shape.tagged) bad(type, "misplaced tag");
        shape.tagged = true;
        continue;
      }
      words.push_back(std::move(w));
    } else if (c == '*') {
      if (words.empty() || in_suffix) bad(type, "stray '*'");
      ++shape.pointer_depth;
      ++i;
    } else if (c == '[') {
      if (words.empty()) bad(type, "stray '['");
      auto close = type.find(']', i);
      if (close == std::string_view::npos) bad(type, "unclosed '['");
      auto inner = type.substr(i + 1, close - i - 1);
      while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.front()))) inner.remove_prefix(1);
      while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.back()))) inner.remove_suffix(1);
      if (inner.empty()) {
        shape.dims.push_back(-1);
      } else {
        long n = 0;
        for (char d : inner) {
          if (!std::isdigit(static_cast<unsigned char>(d))) bad(type, "non-numeric bound");
          n = n * 10 + (d - '0');
        }
        shape.dims.push_back(n);
      }
      in_suffix = true;
      i = close + 1;
    } else {
      bad(type, "unexpected character");
    }
  }
  if (shape.tagged && words.size() != 1) bad(type, "tag needs one name");
  shape.base = shape.tagged ? words.front() : canonical_base(words);
  if (shape.base.empty()) bad(type, "empty");
  return shape;
}

TypeClusterTable TypeClusterTable::defaults() {
  TypeClusterTable t;
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
      {"int8", {"bool", "_Bool", "_BOOL1", "char", "__int8", "_BYTE", "int8_t", "uint8_t"}},
      {"int16", {"short", "__int16", "_WORD", "_BOOL2", "int16_t", "uint16_t"}},
      {"int32", {"int", "long", "__int32", "_DWORD", "_BOOL4", "int32_t", "uint32_t", "wchar_t"}},
      {"int64",
       {"long long", "__int64", "_QWORD", "size_t", "ssize_t", "int64_t", "uint64_t", "intptr_t",
        "uintptr_t", "ptrdiff_t", "off_t"}},
      {"int128", {"__int128", "_OWORD"}},
      {"float", {"float"}},
      {"double", {"double", "long double"}},
      {"void", {"void"}},
  };
  for (const auto& [cluster, names] : groups) {
    for (const auto& n : names) t.add(n, cluster);
  }
  return t;
}

TypeClusterTable TypeClusterTable::from_json(const nlohmann::json& doc) {
  TypeClusterTable t;
  try {
    for (const auto& [cluster, names] : doc.at("clusters").items()) {
      for (const auto& n : names) t.add(n.get<std::string>(), cluster);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("cluster table: ") + e.what());
  }
  return t;
}

nlohmann::json TypeClusterTable::to_json() const {
  nlohmann::json clusters = nlohmann::json::object();
  for (const auto& [name, cluster] : clusters_) clusters[cluster].push_back(name);
  return {{"clusters", clusters}};
}

void TypeClusterTable::add(const std::string& spelling, const std::string& cluster) {
  clusters_[parse_type(spelling).base] = cluster;
}

std::optional<std::string> TypeClusterTable::base_cluster(std::string_view base) const {
  auto it = clusters_.find(std::string(base));
  if (it == clusters_.end()) return std::nullopt;
  return it->second;
}

std::string TypeClusterTable::cluster_of(std::string_view type) const {
  auto shape = parse_type(type);
  std::string id;
  if (shape.pointer_depth > 0) {
    id = "ptr" + std::to_string(shape.pointer_depth);
  } else if (auto c = shape.tagged ? std::nullopt : base_cluster(shape.base)) {
    id = *c;
  } else {
    id = "named:" + shape.base;
  }
  for (long d : shape.dims) id += "[" + (d < 0 ? std::string() : std::to_string(d)) + "]";
  return id;
}

bool TypeClusterTable::known(std::string_view type) const {
  try {
    auto shape = parse_type(type);
    return !shape.tagged && base_cluster(shape.base).has_value();
  } catch (const Error&) {
    return false;
  }
}

bool type_match(std::string_view pred, std::string_view gt, const TypeClusterTable& table) {
  auto p = table.cluster_of(pred);
  try {
    return p == table.cluster_of(gt);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace recon::bench
