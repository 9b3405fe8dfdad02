#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace recon::llmgate {

/// Prompt templates shipped under prompts/, keyed by file stem
/// ("judge.v1"). Throws Error(InvalidArgument) when unknown.
const std::string& prompt_template(std::string_view id);
std::vector<std::string> template_ids();

/// Replaces every {{key}}. Throws Error(InvalidArgument) on a placeholder
/// without a value.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace recon::llmgate
