#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace recon::pseudoc {

enum class AstKind {
  FunctionDef,
  Block,
  Decl,
  Assign,
  Call,
  BinaryOp,
  UnaryOp,
  Index,
  Member,
  Cast,
  Identifier,
  Literal,
  Return,
  If,
  For,
  While,
  Break,
  Goto,
  Label,
  Opaque,
};

std::string_view to_string(AstKind kind);

struct SourceSpan {
  std::size_t begin = 0;  // byte offsets, half open
  std::size_t end = 0;
  int line_begin = 1;
  int column_begin = 1;
  int line_end = 1;
  int column_end = 1;

  bool contains(const SourceSpan& other) const {
    return begin <= other.begin && other.end <= end;
  }
};

// `op` disambiguates nodes sharing a kind:
//   BinaryOp  "+", "==", "?:", ",", ...
//   UnaryOp   "*", "&", "-", "!", "~", "++x", "x++", "sizeof", ...
//   Assign    "=", "+=", ...
//   Member    "." or "->" (member name in `type_text`)
//   Break     "break" or "continue"
//   While     "while" or "do"
//   If        "if" or "switch"
//   Label     "label", "case" or "default"
//   Literal   "number", "string" or "char"
//   FunctionDef, Decl, Cast carry the spelled type in `type_text`.
struct AstNode {
  AstKind kind = AstKind::Opaque;
  std::string op;
  std::string type_text;
  std::string text;
  SourceSpan span;
  std::vector<AstNode> children;

  bool is(AstKind k) const { return kind == k; }
};

/// Pre-order traversal. Returning false from `visit` skips the children.
void walk(const AstNode& node, const std::function<bool(const AstNode&)>& visit);

/// Lisp-style dump of the tree, used by tests and the CLI's --ast flag.
std::string to_sexp(const AstNode& node);

/// Removes any number of enclosing casts.
const AstNode& strip_casts(const AstNode& node);

}  // namespace recon::pseudoc
