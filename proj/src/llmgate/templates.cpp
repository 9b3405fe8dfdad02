#include "recon/llmgate/templates.hpp"

#include "recon/error.hpp"

namespace recon::llmgate {

namespace {

struct Embedded {
  const char* id;
  const char* text;
};

constexpr Embedded kPrompts[] = {
#include "prompts.inc"
};

const std::map<std::string, std::string, std::less<>>& registry() {
  static const auto reg = [] {
    std::map<std::string, std::string, std::less<>> out;
    for (const auto& e : kPrompts) out.emplace(e.id, e.text);
    return out;
  }();
  return reg;
}

}  // namespace

const std::string& prompt_template(std::string_view id) {
  auto it = registry().find(id);
  if (it == registry().end()) throw Error(ErrorCode::InvalidArgument, "unknown prompt template '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> template_ids() {
  std::vector<std::string> out;
  for (const auto& [id, _] : registry()) out.push_back(id);
  return out;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto open = text.find("{{", i);
    if (open == std::string_view::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    std::string key(text.substr(open + 2, close - open - 2));
    auto it = values.find(key);
    if (it == values.end()) throw Error(ErrorCode::InvalidArgument, "template needs '" + key + "'");
    out.append(text.substr(i, open - i));
    out += it->second;
    i = close + 2;
  }
  out.append(text.substr(i));
  return out;
}

}  // namespace recon::llmgate
