#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "recon/pseudoc/ast.hpp"
#include "recon/pseudoc/function.hpp"

namespace recon::dflow {

/// The simple lvalue/rvalue shapes the tracer propagates through:
/// x, *x, &x, x[y], x.m, x->m (casts anywhere are ignored).
enum class Shape { Var, Deref, AddrOf, Index, Dot, Arrow };

struct SimpleForm {
  Shape shape = Shape::Var;
  std::string base;   // declared variable at the root of the expression
  std::string extra;  // index text or member name
};

/// Recognizes a simple form whose base is a declared parameter or local of fn.
std::optional<SimpleForm> simple_form(const pseudoc::AstNode& expr, const pseudoc::PseudoFunction& fn);

/// Alias of the whole expression given the alias of its base.
std::string apply_shape(const SimpleForm& form, const std::string& base_alias);

/// Alias of the base given the alias of the whole expression; nullopt when the
/// shape cannot be inverted (index and member forms).
std::optional<std::string> invert_shape(const SimpleForm& form, const std::string& expr_alias);

/// "name@function".
std::string origin_alias(std::string_view var, std::string_view function);

/// Shorter first, then lexicographic.
bool alias_less(const std::string& a, const std::string& b);

/// Number of "name@function" origins inside an alias string.
int count_origins(std::string_view alias);

}  // namespace recon::dflow
