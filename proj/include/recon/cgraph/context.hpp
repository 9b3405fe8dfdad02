#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recon/cgraph/graph.hpp"

namespace recon::cgraph {

struct ContextConfig {
  int depth_callee = 1;
  int depth_caller = 1;
  int k = 10;
  double beta = 25.0;
};

enum class Direction { Forward, Backward };

struct CallChain {
  Direction direction = Direction::Forward;
  std::vector<std::string> nodes;  // target first
};

struct Candidate {
  std::string name;
  int depth = 0;
  double score = 0.0;
  bool dataflow_priority = false;
  Direction direction = Direction::Forward;
};

struct ContextSelection {
  std::string target;
  std::vector<CallChain> chains;
  std::vector<Candidate> candidates;  // sorted by name
  std::vector<std::string> ranked;    // top-k in rank order, best first
  std::vector<std::string> selected;  // emission order, deepest first
};

/// N(f): 1 when the function carries a real symbol name.
double name_indicator(std::string_view name);

/// Raw-count score; `callees` is the distinct callee name set.
double informative_score(std::string_view name, std::size_t num_strings, int num_lines,
                         const std::vector<std::string>& callees, double beta);

double informative_score(const pseudoc::PseudoFunction& fn, const CallGraph& graph,
                         double beta);

/// BFS over callees and callers up to the configured depths. Fills `chains`
/// and `candidates`; external nodes end chains but are never candidates.
ContextSelection collect_context(const CallGraph& graph, const std::string& target,
                                 const ContextConfig& cfg);

/// Ranks candidates by (data-flow reach, score, -depth, name), keeps the top
/// k and orders them deepest first for emission.
ContextSelection select_context(ContextSelection sel, const ContextConfig& cfg,
                                const std::set<std::string>& traced);

std::string_view to_string(Direction d);
nlohmann::json to_json(const ContextSelection& sel);

}  // namespace recon::cgraph
