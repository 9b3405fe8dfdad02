#include "recon/pseudoc/ast.hpp"

namespace recon::pseudoc {

std::string_view to_string(AstKind kind) {
  switch (kind) {
    case AstKind::FunctionDef: return "FunctionDef";
    case AstKind::Block: return "Block";
    case AstKind::Decl: return "Decl";
    case AstKind::Assign: return "Assign";
    case AstKind::Call: return "Call";
    case AstKind::BinaryOp: return "BinaryOp";
    case AstKind::UnaryOp: return "UnaryOp";
    case AstKind::Index: return "Index";
    case AstKind::Member: return "Member";
    case AstKind::Cast: return "Cast";
    case AstKind::Identifier: return "Identifier";
    case AstKind::Literal: return "Literal";
    case AstKind::Return: return "Return";
    case AstKind::If: return "If";
    case AstKind::For: return "For";
    case AstKind::While: return "While";
    case AstKind::Break: return "Break";
    case AstKind::Goto: return "Goto";
    case AstKind::Label: return "Label";
    case AstKind::Opaque: return "Opaque";
  }
  return "?";
}

void walk(const AstNode& node, const std::function<bool(const AstNode&)>& visit) {
  if (!visit(node)) return;
  for (const auto& child : node.children) walk(child, visit);
}

std::string to_sexp(const AstNode& node) {
  std::string out = "(";
  out += to_string(node.kind);
  if (!node.op.empty()) out += " op=" + node.op;
  if (!node.type_text.empty()) out += " type=\"" + node.type_text + "\"";
  if (node.kind == AstKind::Identifier || node.kind == AstKind::Literal) {
    out += " " + node.text;
  }
  for (const auto& child : node.children) {
    out += " ";
    out += to_sexp(child);
  }
  out += ")";
  return out;
}

const AstNode& strip_casts(const AstNode& node) {
  const AstNode* cur = &node;
  while (cur->kind == AstKind::Cast && !cur->children.empty()) cur = &cur->children.front();
  return *cur;
}

}  // namespace recon::pseudoc
