#include "recon/dflow/alias.hpp"

#include <regex>

namespace recon::dflow {

using pseudoc::AstKind;
using pseudoc::AstNode;

namespace {

const AstNode* declared_var(const AstNode& node, const pseudoc::PseudoFunction& fn) {
  const AstNode& n = pseudoc::strip_casts(node);
  if (n.kind == AstKind::Identifier && fn.find_var(n.text)) return &n;
  return nullptr;
}

// True when the alias has a top-level '+' or '-' and must be parenthesized
// before another operator is applied to it.
bool is_additive(std::string_view a) {
  int depth = 0;
  for (std::size_t i = 0; i + 2 < a.size(); ++i) {
    char c = a[i];
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (depth == 0 && c == ' ' && (a[i + 1] == '+' || a[i + 1] == '-') && a[i + 2] == ' ') return true;
  }
  return false;
}

bool fully_parenthesized(std::string_view a) {
  if (a.size() < 2 || a.front() != '(' || a.back() != ')') return false;
  int depth = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == '(') ++depth;
    if (a[i] == ')') --depth;
    if (depth == 0 && i + 1 < a.size()) return false;
  }
  return true;
}

std::string prefix(char op, const std::string& alias) {
  char inverse = op == '*' ? '&' : '*';
  if (!alias.empty() && alias.front() == inverse && !is_additive(alias)) {
    std::string rest = alias.substr(1);
    if (fully_parenthesized(rest)) rest = rest.substr(1, rest.size() - 2);
    return rest;
  }
  if (is_additive(alias)) return std::string(1, op) + "(" + alias + ")";
  return std::string(1, op) + alias;
}

std::string postfix_base(const std::string& alias) {
  if (is_additive(alias) || (!alias.empty() && (alias.front() == '*' || alias.front() == '&'))) {
    return "(" + alias + ")";
  }
  return alias;
}

}  // namespace

std::optional<SimpleForm> simple_form(const AstNode& expr, const pseudoc::PseudoFunction& fn) {
  const AstNode& e = pseudoc::strip_casts(expr);
  SimpleForm out;
  switch (e.kind) {
    case AstKind::Identifier:
      if (!fn.find_var(e.text)) return std::nullopt;
      out.shape = Shape::Var;
      out.base = e.text;
      return out;
    case AstKind::UnaryOp:
      if ((e.op == "*" || e.op == "&") && !e.children.empty()) {
        if (const auto* id = declared_var(e.children[0], fn)) {
          out.shape = e.op == "*" ? Shape::Deref : Shape::AddrOf;
          out.base = id->text;
          return out;
        }
      }
      return std::nullopt;
    case AstKind::Index:
      if (const auto* id = declared_var(e.children[0], fn)) {
        out.shape = Shape::Index;
        out.base = id->text;
        out.extra = e.children[1].text;
        return out;
      }
      return std::nullopt;
    case AstKind::Member:
      if (const auto* id = declared_var(e.children[0], fn)) {
        out.shape = e.op == "." ? Shape::Dot : Shape::Arrow;
        out.base = id->text;
        out.extra = e.type_text;
        return out;
      }
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

std::string apply_shape(const SimpleForm& form, const std::string& a) {
  switch (form.shape) {
    case Shape::Var: return a;
    case Shape::Deref: return prefix('*', a);
    case Shape::AddrOf: return prefix('&', a);
    case Shape::Index: return postfix_base(a) + "[" + form.extra + "]";
    case Shape::Dot: return postfix_base(a) + "." + form.extra;
    case Shape::Arrow: return postfix_base(a) + "->" + form.extra;
  }
  return a;
}

std::optional<std::string> invert_shape(const SimpleForm& form, const std::string& a) {
  switch (form.shape) {
    case Shape::Var: return a;
    case Shape::Deref: return prefix('&', a);
    case Shape::AddrOf: return prefix('*', a);
    default: return std::nullopt;
  }
}

std::string origin_alias(std::string_view var, std::string_view function) {
  return std::string(var) + "@" + std::string(function);
}

bool alias_less(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

int count_origins(std::string_view alias) {
  static const std::regex kOrigin(R"([A-Za-z_]\w*@[A-Za-z_][\w:]*)");
  std::string s(alias);
  return static_cast<int>(std::distance(std::sregex_iterator(s.begin(), s.end(), kOrigin),
                                        std::sregex_iterator()));
}

}  // namespace recon::dflow
