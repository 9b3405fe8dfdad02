#include "recon/cgraph/graph.hpp"

#include "recon/error.hpp"

namespace recon::cgraph {

namespace {
const std::set<std::string> kEmpty;
}

CallGraph::CallGraph(const pseudoc::DecompDump& dump)
    : dump_(std::make_shared<pseudoc::DecompDump>(dump)) {
  for (const auto& rec : dump_->functions) {
    if (nodes_.count(rec.name)) {
      problems_.push_back({rec.name, 0, "duplicate function name; later record ignored"});
      continue;
    }
    Node& n = nodes_[rec.name];
    if (rec.is_external || rec.pseudocode.empty()) continue;
    try {
      n.fn = std::make_shared<const pseudoc::PseudoFunction>(pseudoc::parse_function(rec));
      n.external = false;
    } catch (const ParseFailure& e) {
      problems_.push_back({rec.name, e.line(), e.what()});
    }
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [name, n] : nodes_) {
    if (!n.fn) continue;
    for (const auto& site : n.fn->call_sites) {
      if (!site.callee_name.empty()) edges.emplace_back(name, site.callee_name);
    }
  }
  for (const auto& [from, to] : edges) {
    nodes_[from].callees.insert(to);
    nodes_[to].callers.insert(from);  // creates unresolved callees as external
  }
}

const CallGraph::Node& CallGraph::node(std::string_view name) const {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::UnknownFunction, "unknown function '" + std::string(name) + "'");
  }
  return it->second;
}

bool CallGraph::contains(std::string_view name) const { return nodes_.find(name) != nodes_.end(); }

bool CallGraph::is_external(std::string_view name) const { return node(name).external; }

const pseudoc::PseudoFunction* CallGraph::function(std::string_view name) const {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? nullptr : it->second.fn.get();
}

const std::set<std::string>& CallGraph::callees(std::string_view name) const {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? kEmpty : it->second.callees;
}

const std::set<std::string>& CallGraph::callers(std::string_view name) const {
  auto it = nodes_.find(name);
  return it == nodes_.end() ? kEmpty : it->second.callers;
}

std::vector<std::string> CallGraph::names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& [name, _] : nodes_) out.push_back(name);
  return out;
}

std::size_t CallGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, node] : nodes_) n += node.callees.size();
  return n;
}

CallGraph build_call_graph(const pseudoc::DecompDump& dump) { return CallGraph(dump); }

}  // namespace recon::cgraph
