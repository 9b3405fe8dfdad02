#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace recon::pseudoc {

/// Splits an identifier into lowercase word tokens. Boundaries are
/// underscores, digit/letter transitions and camelCase humps, where an
/// acronym run ends before its last capital when a lowercase letter follows
/// ("parseHTTPRequest2" -> parse, http, request, 2).
std::vector<std::string> tokenize_identifier(std::string_view name);

/// True when `name` is a C identifier that is not a keyword.
bool is_valid_identifier(std::string_view name);

/// True for decompiler placeholders such as sub_1909, loc_4010A0, j_sub_12.
bool is_placeholder_name(std::string_view name);

}  // namespace recon::pseudoc
