#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::pseudoc {

/// One exported function as it appears in the dump interchange format.
struct FunctionRecord {
  std::string name;
  std::uint64_t address = 0;
  std::string pseudocode;
  bool is_external = false;
};

struct RejectedLine {
  int line = 0;
  std::string reason;
};

/// A whole-binary decompilation export. Addresses are unique.
struct DecompDump {
  std::string project_name;
  std::string binary_name;
  std::vector<FunctionRecord> functions;
  std::vector<RejectedLine> rejects;

  const FunctionRecord* find(std::string_view name) const;
};

/// Reads the JSONL interchange format, one object per function:
///   {"project": str, "binary": str, "name": str, "address": uint,
///    "pseudocode": str, "external": bool}
/// Malformed lines are kept in `rejects` with their 1-based line number.
/// Throws Error(EmptyDump) when no record survives and
/// Error(DuplicateFunction) on a repeated address.
DecompDump parse_dump(std::istream& input);
DecompDump parse_dump_text(std::string_view text);
DecompDump load_dump(const std::string& path);

/// Writes `dump` back in the interchange format.
std::string to_jsonl(const DecompDump& dump);

}  // namespace recon::pseudoc
