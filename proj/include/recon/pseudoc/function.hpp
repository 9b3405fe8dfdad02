#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recon/pseudoc/ast.hpp"
#include "recon/pseudoc/dump.hpp"

namespace recon::pseudoc {

enum class VarKind { Param, Local };

struct VarDecl {
  std::string name;
  std::string declared_type;  // verbatim spelling, e.g. "_OWORD *"
  VarKind kind = VarKind::Local;
  int position = -1;  // parameter index, -1 for locals
  int line = 1;
  // Byte range covering the type and declarator, used by rename overlays.
  // Empty when the type is shared with other declarators (`int a, b;`).
  std::size_t type_begin = 0;
  std::size_t type_end = 0;
  std::size_t name_begin = 0;
  std::size_t name_end = 0;
  bool owns_type = true;
};

struct CallSite {
  std::string callee_name;  // empty for indirect calls
  std::vector<AstNode> args;
  int line = 1;
};

struct StringLiteral {
  int line = 1;
  std::string text;  // including the quotes
};

/// A parsed decompiled function plus the symbol tables derived from it.
/// Immutable after construction.
struct PseudoFunction {
  FunctionRecord record;
  AstNode ast;
  std::string return_type;
  std::vector<VarDecl> params;
  std::vector<VarDecl> locals;
  std::vector<CallSite> call_sites;
  std::vector<StringLiteral> string_literals;
  int line_count = 1;
  int body_open_line = 1;

  const std::string& name() const { return record.name; }
  const std::string& source() const { return record.pseudocode; }
  const VarDecl* find_var(std::string_view name) const;
  std::vector<std::string> lines() const;
};

/// Tolerant parse of one function. Statements outside the grammar become
/// Opaque nodes; only an unrecoverable brace imbalance throws ParseFailure.
PseudoFunction parse_function(const FunctionRecord& record);

/// Number of text lines, at least 1.
int count_lines(std::string_view text);

}  // namespace recon::pseudoc
