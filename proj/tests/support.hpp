#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "recon/pseudoc/dump.hpp"
#include "recon/pseudoc/function.hpp"

namespace recon::testing {

inline std::string fixture_path(const std::string& rel) {
  const char* root = std::getenv("RECON_FIXTURES");
  std::string base = root ? root : RECON_SOURCE_DIR "/tests/fixtures";
  return base + "/" + rel;
}

inline std::string read_fixture(const std::string& rel) {
  std::ifstream in(fixture_path(rel), std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline pseudoc::FunctionRecord record(std::string name, std::string code, std::uint64_t address = 0x1000) {
  pseudoc::FunctionRecord r;
  r.name = std::move(name);
  r.address = address;
  r.pseudocode = std::move(code);
  return r;
}

inline pseudoc::PseudoFunction parse(std::string name, std::string code) {
  return pseudoc::parse_function(record(std::move(name), std::move(code)));
}

}  // namespace recon::testing
