#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::promptkit {

/// Identifiers of every published prediction schema ("funcname.v1", ...).
std::vector<std::string> schema_ids();

/// The schema document for `id`. Throws Error(InvalidArgument) when unknown.
const nlohmann::json& schema(std::string_view id);

/// Checks `value` against the JSON Schema subset used by the published
/// schemas: type, properties, required, items, minItems, maxItems,
/// minLength, minimum, maximum. Returns one message per violation, each
/// prefixed with its JSON pointer.
std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& value);

}  // namespace recon::promptkit
