#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recon/pseudoc/dump.hpp"
#include "recon/pseudoc/function.hpp"

namespace recon::cgraph {

/// Caller/callee graph over one dump. Nodes without a parsed body (external
/// records, unresolved callee names, functions whose parse failed) are kept as
/// external nodes so every edge has both endpoints.
class CallGraph {
 public:
  struct ParseProblem {
    std::string function;
    int line = 0;
    std::string message;
  };

  explicit CallGraph(const pseudoc::DecompDump& dump);

  const pseudoc::DecompDump& dump() const { return *dump_; }
  bool contains(std::string_view name) const;
  bool is_external(std::string_view name) const;
  /// Parsed body, or nullptr for external nodes.
  const pseudoc::PseudoFunction* function(std::string_view name) const;
  const std::set<std::string>& callees(std::string_view name) const;
  const std::set<std::string>& callers(std::string_view name) const;
  /// All node names in lexicographic order.
  std::vector<std::string> names() const;
  std::size_t edge_count() const;
  const std::vector<ParseProblem>& parse_problems() const { return problems_; }

 private:
  struct Node {
    std::shared_ptr<const pseudoc::PseudoFunction> fn;
    bool external = true;
    std::set<std::string> callees;
    std::set<std::string> callers;
  };
  const Node& node(std::string_view name) const;

  std::shared_ptr<const pseudoc::DecompDump> dump_;
  std::map<std::string, Node, std::less<>> nodes_;
  std::vector<ParseProblem> problems_;
};

CallGraph build_call_graph(const pseudoc::DecompDump& dump);

}  // namespace recon::cgraph
