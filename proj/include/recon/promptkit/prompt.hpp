#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recon/cgraph/context.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/promptkit/task.hpp"

namespace recon::promptkit {

inline constexpr std::string_view kContextHeader = "## Context Functions";
inline constexpr std::string_view kChainsHeader = "## Call Chains";
inline constexpr std::string_view kDataFlowHeader = "## Data Flow";
inline constexpr std::string_view kTargetHeader = "## Target Function";
inline constexpr std::string_view kThoughtTag = "<Thought>";
inline constexpr std::string_view kSuperThoughtTag = "<Super-Thought>";

struct PromptOptions {
  bool super_thought = false;
  int budget = 32768;  // input tokens
  double chars_per_token = 4.0;
};

/// Model input: context functions, call chains, data-flow digest, target,
/// task tag and thinking tag, emitted in that order.
struct PromptBundle {
  std::string target_name;
  std::string part1_target;
  std::vector<std::string> context_names;  // emission order, deepest first
  std::vector<std::string> part2_context;
  std::vector<std::string> part3_chains;   // one rendered chain per entry
  std::string part4_dataflow;
  std::string part5_task;
  std::string thinking_tag;
  int token_estimate = 0;
  int budget = 0;
  std::vector<std::string> dropped_context;
  int dropped_chains = 0;
  bool dropped_annotations = false;

  std::string text() const;
};

int estimate_tokens(std::string_view text, double chars_per_token = 4.0);

/// Assembles the prompt for `sel.target`. When over budget, drops context
/// functions lowest rank first, then chains (last first), then the data-flow
/// annotations. Throws Error(BudgetTooSmall) if the bare target does not fit.
PromptBundle build_prompt(const cgraph::CallGraph& graph, const cgraph::ContextSelection& sel,
                          const std::vector<dflow::TraceReport>& traces, const TaskSpec& task,
                          const PromptOptions& opts = {});

/// Renders one chain: forward chains read target -> callee, backward chains
/// caller -> target.
std::string render_chain(const cgraph::CallChain& chain);

/// Alias digest of the reports, one line per traced variable.
std::string render_dataflow(const std::vector<dflow::TraceReport>& traces);

/// Fixed system message that explains the template and the answer format.
const std::string& system_prompt();

nlohmann::json to_json(const PromptBundle& bundle);

}  // namespace recon::promptkit
