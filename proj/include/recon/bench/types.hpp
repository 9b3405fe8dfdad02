#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::bench {

/// A type string split into base name, indirection depth and array bounds.
/// "const unsigned char *[4]" -> {"char", 1, {4}} with signedness dropped.
struct TypeShape {
  std::string base;         // canonical spelling without qualifiers
  bool tagged = false;      // written with struct/union/enum
  int pointer_depth = 0;
  std::vector<long> dims;   // array bounds, -1 for []
};

/// Parses a C type spelling. Throws Error(UnknownType) on anything that is
/// not identifiers, '*', and array suffixes.
TypeShape parse_type(std::string_view type);

/// Canonical type spelling -> cluster id. Pointers cluster by depth alone.
class TypeClusterTable {
 public:
  static TypeClusterTable defaults();
  /// {"clusters": {"int64": ["__int64", ...], ...}}
  static TypeClusterTable from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  void add(const std::string& spelling, const std::string& cluster);

  /// Cluster of a base spelling (qualifiers and signedness ignored), if known.
  std::optional<std::string> base_cluster(std::string_view base) const;

  /// Cluster id for a whole type. Unknown bases cluster by name, so any
  /// parseable type gets an id. Throws Error(UnknownType) when unparseable.
  std::string cluster_of(std::string_view type) const;

  /// True when the base is in the table (any indirection / array of it).
  bool known(std::string_view type) const;

 private:
  std::map<std::string, std::string> clusters_;
};

/// Same cluster. Throws Error(UnknownType) when `pred` is not a type.
bool type_match(std::string_view pred, std::string_view gt, const TypeClusterTable& table);

}  // namespace recon::bench
