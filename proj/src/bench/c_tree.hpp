#pragma once

// Concrete C syntax tree in the node vocabulary of tree-sitter-c, built from
// the pseudoc AST. Only CodeBLEU's syntax and data-flow components use it.

#include <string>
#include <string_view>
#include <vector>

namespace recon::bench::detail {

struct CNode {
  std::string type;
  std::string field;  // field name in the parent, empty when unnamed
  std::string text;   // token leaves and string literals
  std::vector<CNode> kids;  // named children only
  int idx = -1;       // token index, set by number_tokens()

  /// A node without any children, named or anonymous.
  bool leaf() const;
  /// Token position for data flow: leaves plus whole string literals.
  bool token() const { return leaf() || type == "string_literal"; }
};

/// Parses `code` (one or more functions, declarations in between allowed).
/// Unparseable input becomes a flat ERROR node over its tokens.
CNode c_tree(std::string_view code);

/// tree-sitter style s-expression: (type field: (child) ...).
std::string sexp(const CNode& node);

/// Numbers token nodes in source order; returns the count.
int number_tokens(CNode& root);

}  // namespace recon::bench::detail
