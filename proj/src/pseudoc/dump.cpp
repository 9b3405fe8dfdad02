#include "recon/pseudoc/dump.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"

namespace recon::pseudoc {

using nlohmann::json;

const FunctionRecord* DecompDump::find(std::string_view name) const {
  for (const auto& fn : functions) {
    if (fn.name == name) return &fn;
  }
  return nullptr;
}

namespace {

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::string reason_for(const json& obj) {
  if (!obj.is_object()) return "record is not a JSON object";
  if (!obj.contains("name") || !obj["name"].is_string()) return "missing string field 'name'";
  if (!obj.contains("address") || !obj["address"].is_number_unsigned()) {
    return "missing unsigned field 'address'";
  }
  bool external = obj.value("external", false);
  if (obj.contains("external") && !obj["external"].is_boolean()) return "'external' must be a boolean";
  if (!obj.contains("pseudocode") || !obj["pseudocode"].is_string()) {
    if (!external) return "missing string field 'pseudocode'";
  } else if (!external && obj["pseudocode"].get_ref<const std::string&>().empty()) {
    return "empty pseudocode for a non-external function";
  }
  return {};
}

}  // namespace

DecompDump parse_dump(std::istream& input) {
  DecompDump dump;
  std::set<std::uint64_t> addresses;
  std::string line;
  int line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) {
      dump.rejects.push_back({line_no, "malformed JSON"});
      continue;
    }
    if (auto reason = reason_for(obj); !reason.empty()) {
      dump.rejects.push_back({line_no, reason});
      continue;
    }
    FunctionRecord rec;
    rec.name = obj["name"].get<std::string>();
    rec.address = obj["address"].get<std::uint64_t>();
    rec.is_external = obj.value("external", false);
    if (obj.contains("pseudocode") && obj["pseudocode"].is_string()) {
      rec.pseudocode = obj["pseudocode"].get<std::string>();
    }
    if (!addresses.insert(rec.address).second) {
      std::ostringstream msg;
      msg << "duplicate function address 0x" << std::hex << rec.address << " (line " << std::dec
          << line_no << ")";
      throw Error(ErrorCode::DuplicateFunction, msg.str());
    }
    if (dump.functions.empty()) {
      dump.project_name = obj.value("project", "");
      dump.binary_name = obj.value("binary", "");
    }
    dump.functions.push_back(std::move(rec));
  }
  if (dump.functions.empty()) {
    std::string msg = "dump contains no function records";
    if (!dump.rejects.empty()) {
      msg += " (first reject at line " + std::to_string(dump.rejects.front().line) + ": " +
             dump.rejects.front().reason + ")";
    }
    throw Error(ErrorCode::EmptyDump, msg);
  }
  return dump;
}

DecompDump parse_dump_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dump(in);
}

DecompDump load_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dump " + path);
  return parse_dump(in);
}

std::string to_jsonl(const DecompDump& dump) {
  std::string out;
  for (const auto& fn : dump.functions) {
    json obj = {{"project", dump.project_name},
                {"binary", dump.binary_name},
                {"name", fn.name},
                {"address", fn.address},
                {"pseudocode", fn.pseudocode},
                {"external", fn.is_external}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace recon::pseudoc
