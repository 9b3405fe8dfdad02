#include "recon/pseudoc/types.hpp"

#include <set>

namespace recon::pseudoc {

namespace {

const std::set<std::string_view, std::less<>>& builtin_words() {
  static const std::set<std::string_view, std::less<>> kWords = {
      "void", "char", "short", "int", "long", "float", "double", "bool", "_Bool", "signed",
      "unsigned", "__int8", "__int16", "__int32", "__int64", "__int128", "_BYTE", "_WORD",
      "_DWORD", "_QWORD", "_OWORD", "_TBYTE", "_UNKNOWN", "_BOOL1", "_BOOL2", "_BOOL4",
      "_BOOL8", "size_t", "ssize_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t", "int8_t",
      "int16_t", "int32_t", "int64_t", "uintptr_t", "intptr_t", "ptrdiff_t", "wchar_t",
      "char16_t", "char32_t", "__m64", "__m128", "__m128i", "__m128d", "__m256", "__m256i",
      "FILE", "struct", "union", "enum", "__uint128_t", "__int128_t", "off_t", "time_t",
      "DWORD", "BYTE", "WORD", "BOOL", "HANDLE", "LPVOID", "QWORD",
  };
  return kWords;
}

}  // namespace

bool is_builtin_type_word(std::string_view word) { return builtin_words().count(word) > 0; }

bool is_type_qualifier(std::string_view word) {
  static const std::set<std::string_view, std::less<>> kQuals = {
      "const", "volatile", "restrict", "__restrict", "static", "extern", "register",
      "inline", "__unaligned", "__ptr32", "__ptr64", "__hidden", "__shifted", "thread_local",
  };
  return kQuals.count(word) > 0;
}

bool is_calling_convention(std::string_view word) {
  static const std::set<std::string_view, std::less<>> kConventions = {
      "__fastcall", "__cdecl", "__stdcall", "__thiscall", "__usercall", "__userpurge",
      "__vectorcall", "__pascal", "__noreturn", "__spoils", "__golang", "__swiftcall",
      "__noinline", "__high", "__far", "__near", "__interrupt", "__attribute__",
  };
  return kConventions.count(word) > 0;
}

std::string format_type(const std::vector<std::string_view>& tokens) {
  std::string out;
  std::string_view prev;
  for (auto tok : tokens) {
    if (out.empty()) {
      out = std::string(tok);
    } else if (tok == "*") {
      out += prev == "*" ? "*" : " *";
    } else if (tok == "[" || tok == "]" || prev == "[" || tok == ")" || prev == "(" ||
               tok == "," || tok == "(") {
      if (tok == "(" && prev != "(" && prev != "*") out += " ";
      out += tok;
    } else if (prev == ",") {
      out += " ";
      out += tok;
    } else {
      out += " ";
      out += tok;
    }
    prev = tok;
  }
  return out;
}

}  // namespace recon::pseudoc
