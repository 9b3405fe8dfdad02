#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace recon::pseudoc {

/// Builtin spellings that start a type: C keywords, decompiler typedefs
/// (_BYTE, __int64, _OWORD, ...) and the common <stdint.h> names.
bool is_builtin_type_word(std::string_view word);

/// Qualifiers and storage classes that may precede or follow a type.
bool is_type_qualifier(std::string_view word);

/// Calling conventions and decompiler function attributes.
bool is_calling_convention(std::string_view word);

/// Joins type tokens with canonical spacing: "unsigned __int64", "char **",
/// "uint8_t[16]".
std::string format_type(const std::vector<std::string_view>& tokens);

}  // namespace recon::pseudoc
