#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recon/cgraph/context.hpp"
#include "recon/cgraph/graph.hpp"

namespace recon::dflow {

enum class Rule { Def, Expr, AssignLR, AssignRL, CalleeSimple, CalleeExpr, Caller };

std::string_view to_string(Rule r);

struct VarRef {
  std::string function;
  std::string variable;
  auto operator<=>(const VarRef&) const = default;
};

struct UsageRecord {
  std::string function;
  int line = 0;
  std::string statement_text;  // trimmed source line
  std::string variable;
  std::string alias;  // primary alias of `variable`
  Rule rule = Rule::Expr;
};

struct TraceStats {
  int functions_visited = 0;
  double elapsed_seconds = 0.0;
};

struct TraceReport {
  VarRef origin;
  std::vector<UsageRecord> usages;
  // Every traced pair with its aliases; the first entry is the primary one.
  std::map<VarRef, std::vector<std::string>> aliases;
  std::vector<std::string> visit_order;
  TraceStats stats;

  std::set<std::string> functions() const;
};

/// Traces `var` of `target` through callees (rule d) up to cfg.depth_callee
/// and callers (rule e) up to cfg.depth_caller.
///
/// Rules are applied in synchronous rounds until nothing new is traced. A
/// pair's primary alias is fixed in the round it is first traced (the
/// smallest candidate by alias_less wins ties within a round); later
/// derivations only extend its alias list. Usages are then logged once per
/// (function, line, variable) with the strongest applicable rule.
TraceReport trace_variable(const cgraph::CallGraph& graph, const std::string& target,
                           const std::string& var, const cgraph::ContextConfig& cfg);

/// One report per parameter then local of `target`.
std::vector<TraceReport> trace_all(const cgraph::CallGraph& graph, const std::string& target,
                                   const cgraph::ContextConfig& cfg);

/// Appends `// v ~ alias of A` comments to every line carrying usages.
/// Returns annotated text for each function in `functions`.
std::map<std::string, std::string> annotate(const std::vector<const pseudoc::PseudoFunction*>& functions,
                                            const std::vector<TraceReport>& reports);
std::map<std::string, std::string> annotate(const std::vector<const pseudoc::PseudoFunction*>& functions,
                                            const TraceReport& report);

nlohmann::json to_json(const TraceReport& report);

}  // namespace recon::dflow
