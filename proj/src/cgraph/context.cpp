#include "recon/cgraph/context.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"
#include "recon/pseudoc/identifier.hpp"

namespace recon::cgraph {

double name_indicator(std::string_view name) {
  return !name.empty() && !pseudoc::is_placeholder_name(name) ? 1.0 : 0.0;
}

double informative_score(std::string_view name, std::size_t num_strings, int num_lines,
                         const std::vector<std::string>& callees, double beta) {
  double score = name_indicator(name);
  double lines = std::max(num_lines, 1);
  score += std::min(1.0, beta * static_cast<double>(num_strings) / lines);
  if (!callees.empty()) {
    double named = 0;
    for (const auto& c : callees) named += name_indicator(c);
    score += named / static_cast<double>(callees.size());
  }
  return score;
}

double informative_score(const pseudoc::PseudoFunction& fn, const CallGraph& graph, double beta) {
  const auto& set = graph.callees(fn.name());
  std::vector<std::string> callees(set.begin(), set.end());
  return informative_score(fn.name(), fn.string_literals.size(), fn.line_count, callees, beta);
}

std::string_view to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

namespace {

struct Reached {
  int depth;
  std::string parent;
};

// Breadth-first walk in one direction. Returns reached nodes (target
// excluded) and the chains formed by the BFS tree's root-to-leaf paths.
std::map<std::string, Reached> bfs(const CallGraph& graph, const std::string& target, Direction dir,
                                   int limit, std::vector<CallChain>& chains) {
  std::map<std::string, Reached> reached;
  std::map<std::string, std::vector<std::string>> children;
  std::deque<std::pair<std::string, int>> queue{{target, 0}};
  std::set<std::string> visited{target};
  while (!queue.empty()) {
    auto [name, depth] = queue.front();
    queue.pop_front();
    if (depth >= limit) continue;
    if (name != target && graph.is_external(name)) continue;
    const auto& next = dir == Direction::Forward ? graph.callees(name) : graph.callers(name);
    for (const auto& n : next) {
      if (!visited.insert(n).second) continue;
      reached[n] = {depth + 1, name};
      children[name].push_back(n);
      queue.emplace_back(n, depth + 1);
    }
  }
  // Leaves of the BFS tree, in discovery order, give one chain each.
  std::vector<std::string> order;
  std::deque<std::string> walk{target};
  while (!walk.empty()) {
    auto name = walk.front();
    walk.pop_front();
    auto it = children.find(name);
    if (it == children.end()) {
      if (name == target) continue;
      CallChain chain;
      chain.direction = dir;
      for (std::string cur = name; cur != target; cur = reached.at(cur).parent) chain.nodes.push_back(cur);
      chain.nodes.push_back(target);
      std::reverse(chain.nodes.begin(), chain.nodes.end());
      chains.push_back(std::move(chain));
      continue;
    }
    for (const auto& c : it->second) walk.push_back(c);
  }
  return reached;
}

}  // namespace

ContextSelection collect_context(const CallGraph& graph, const std::string& target,
                                 const ContextConfig& cfg) {
  if (!graph.contains(target)) {
    throw Error(ErrorCode::UnknownFunction, "unknown function '" + target + "'");
  }
  ContextSelection sel;
  sel.target = target;
  auto fwd = bfs(graph, target, Direction::Forward, std::max(cfg.depth_callee, 0), sel.chains);
  auto bwd = bfs(graph, target, Direction::Backward, std::max(cfg.depth_caller, 0), sel.chains);

  std::map<std::string, Candidate> merged;
  auto add = [&](const std::map<std::string, Reached>& reached, Direction dir) {
    for (const auto& [name, r] : reached) {
      const auto* fn = graph.function(name);
      if (!fn) continue;
      auto it = merged.find(name);
      if (it != merged.end() && it->second.depth <= r.depth) continue;
      Candidate c;
      c.name = name;
      c.depth = r.depth;
      c.direction = dir;
      c.score = informative_score(*fn, graph, cfg.beta);
      merged[name] = c;
    }
  };
  add(fwd, Direction::Forward);
  add(bwd, Direction::Backward);
  for (auto& [_, c] : merged) sel.candidates.push_back(std::move(c));
  return sel;
}

ContextSelection select_context(ContextSelection sel, const ContextConfig& cfg,
                                const std::set<std::string>& traced) {
  std::vector<const Candidate*> order;
  for (auto& c : sel.candidates) {
    c.dataflow_priority = traced.count(c.name) > 0;
    if (c.name != sel.target) order.push_back(&c);
  }
  std::sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) {
    if (a->dataflow_priority != b->dataflow_priority) return a->dataflow_priority;
    if (a->score != b->score) return a->score > b->score;
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->name < b->name;
  });
  std::size_t k = static_cast<std::size_t>(std::max(cfg.k, 0));
  if (order.size() > k) order.resize(k);
  sel.ranked.clear();
  for (const auto* c : order) sel.ranked.push_back(c->name);
  // Deepest first; within a depth keep rank order so the best candidate of
  // the nearest ring sits closest to the target.
  std::stable_sort(order.begin(), order.end(),
                   [](const Candidate* a, const Candidate* b) { return a->depth > b->depth; });
  sel.selected.clear();
  for (const auto* c : order) sel.selected.push_back(c->name);
  return sel;
}

nlohmann::json to_json(const ContextSelection& sel) {
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : sel.chains) {
    chains.push_back({{"direction", to_string(c.direction)}, {"nodes", c.nodes}});
  }
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : sel.candidates) {
    cands.push_back({{"name", c.name},
                     {"depth", c.depth},
                     {"score", c.score},
                     {"dataflow_priority", c.dataflow_priority},
                     {"direction", to_string(c.direction)}});
  }
  return {{"target", sel.target},
          {"chains", chains},
          {"candidates", cands},
          {"ranked", sel.ranked},
          {"selected", sel.selected}};
}

}  // namespace recon::cgraph
