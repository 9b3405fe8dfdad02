#include "recon/pseudoc/identifier.hpp"

#include <array>
#include <cctype>
#include <regex>

namespace recon::pseudoc {

namespace {

enum class CharClass { Lower, Upper, Digit, Other };

CharClass classify(char c) {
  auto u = static_cast<unsigned char>(c);
  if (std::islower(u)) return CharClass::Lower;
  if (std::isupper(u)) return CharClass::Upper;
  if (std::isdigit(u)) return CharClass::Digit;
  return CharClass::Other;
}

constexpr std::array<std::string_view, 44> kKeywords = {
    "auto",     "break",    "case",     "char",   "const",    "continue", "default",  "do",
    "double",   "else",     "enum",     "extern", "float",    "for",      "goto",     "if",
    "inline",   "int",      "long",     "register", "restrict", "return", "short",    "signed",
    "sizeof",   "static",   "struct",   "switch", "typedef",  "union",    "unsigned", "void",
    "volatile", "while",    "_Bool",    "bool",   "true",     "false",    "__int8",   "__int16",
    "__int32",  "__int64",  "__fastcall", "__cdecl",
};

}  // namespace

std::vector<std::string> tokenize_identifier(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    char c = name[i];
    CharClass cls = classify(c);
    if (cls == CharClass::Other) {
      flush();
      continue;
    }
    if (!cur.empty()) {
      CharClass prev = classify(name[i - 1]);
      bool boundary = false;
      if ((prev == CharClass::Digit) != (cls == CharClass::Digit)) boundary = true;
      if (prev == CharClass::Lower && cls == CharClass::Upper) boundary = true;
      // End of an acronym run: "HTTPRequest" splits before the 'R'.
      if (prev == CharClass::Upper && cls == CharClass::Upper && i + 1 < name.size() &&
          classify(name[i + 1]) == CharClass::Lower) {
        boundary = true;
      }
      if (boundary) flush();
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  flush();
  return out;
}

bool is_valid_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto first = static_cast<unsigned char>(name.front());
  if (!(std::isalpha(first) || name.front() == '_')) return false;
  for (char c : name) {
    auto u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == '_')) return false;
  }
  for (auto kw : kKeywords) {
    if (kw == name) return false;
  }
  return true;
}

bool is_placeholder_name(std::string_view name) {
  static const std::regex kPattern("^(sub|loc|nullsub|j_sub)_[0-9A-Fa-f]+$");
  return std::regex_match(name.begin(), name.end(), kPattern);
}

}  // namespace recon::pseudoc
