#include "recon/promptkit/prompt.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"

namespace recon::promptkit {

namespace {

void section(std::string& out, std::string_view header, const std::string& body) {
  out += header;
  out += '\n';
  out += body;
  if (!body.empty() && body.back() != '\n') out += '\n';
  out += '\n';
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

int estimate_tokens(std::string_view text, double chars_per_token) {
  if (chars_per_token <= 0) throw Error(ErrorCode::InvalidArgument, "chars_per_token must be positive");
  return static_cast<int>(std::ceil(static_cast<double>(text.size()) / chars_per_token));
}

std::string PromptBundle::text() const {
  std::string out;
  if (!part2_context.empty()) {
    std::string body;
    for (std::size_t i = 0; i < part2_context.size(); ++i) {
      if (i) body += '\n';
      body += part2_context[i];
      if (!body.empty() && body.back() != '\n') body += '\n';
    }
    section(out, kContextHeader, body);
  }
  if (!part3_chains.empty()) section(out, kChainsHeader, join_lines(part3_chains));
  if (!part4_dataflow.empty()) section(out, kDataFlowHeader, part4_dataflow);
  section(out, kTargetHeader, part1_target);
  out += part5_task;
  out += '\n';
  out += thinking_tag;
  out += '\n';
  return out;
}

std::string render_chain(const cgraph::CallChain& chain) {
  std::vector<std::string> nodes = chain.nodes;
  if (chain.direction == cgraph::Direction::Backward) std::reverse(nodes.begin(), nodes.end());
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += " -> ";
    out += nodes[i];
  }
  return out;
}

std::string render_dataflow(const std::vector<dflow::TraceReport>& traces) {
  std::string out;
  for (const auto& r : traces) {
    std::string lines;
    for (const auto& [ref, aliases] : r.aliases) {
      if (ref == r.origin) continue;
      lines += "- " + ref.function + ": " + ref.variable + " ~ alias of ";
      for (std::size_t i = 0; i < aliases.size(); ++i) {
        if (i) lines += " or ";
        lines += aliases[i];
      }
      lines += '\n';
    }
    if (lines.empty()) continue;
    out += r.origin.variable + "@" + r.origin.function + ":\n" + lines;
  }
  return out;
}

const std::string& system_prompt() {
  static const std::string text =
      "You are a binary analysis assistant working on decompiled pseudo code.\n"
      "The input lists context functions, call chains and data-flow notes, then the target\n"
      "function and a task tag. Comments of the form `// v ~ alias of x@f` mark variables\n"
      "that carry the value of x in function f.\n"
      "Reason step by step after the thinking tag, then give the answer as one JSON object\n"
      "in a ```json fenced block at the very end.\n";
  return text;
}

PromptBundle build_prompt(const cgraph::CallGraph& graph, const cgraph::ContextSelection& sel,
                          const std::vector<dflow::TraceReport>& traces, const TaskSpec& task,
                          const PromptOptions& opts) {
  const auto* target = graph.function(sel.target);
  if (!target) throw Error(ErrorCode::UnknownFunction, "no pseudo code for '" + sel.target + "'");
  std::vector<const pseudoc::PseudoFunction*> fns{target};
  for (const auto& name : sel.selected) {
    const auto* fn = graph.function(name);
    if (!fn) throw Error(ErrorCode::UnknownFunction, "context function '" + name + "' not in dump");
    fns.push_back(fn);
  }
  auto annotated = dflow::annotate(fns, traces);

  PromptBundle b;
  b.target_name = sel.target;
  b.budget = opts.budget;
  b.part5_task = task.tag();
  b.thinking_tag = std::string(opts.super_thought ? kSuperThoughtTag : kThoughtTag);

  // The bare target must fit on its own.
  b.part1_target = target->source();
  if (estimate_tokens(b.text(), opts.chars_per_token) > opts.budget) {
    throw Error(ErrorCode::BudgetTooSmall, "target '" + sel.target + "' needs " +
                                               std::to_string(estimate_tokens(b.text(), opts.chars_per_token)) +
                                               " tokens, budget is " + std::to_string(opts.budget));
  }

  b.part1_target = annotated.at(sel.target);
  b.context_names = sel.selected;
  for (const auto& name : sel.selected) b.part2_context.push_back(annotated.at(name));
  for (const auto& chain : sel.chains) b.part3_chains.push_back(render_chain(chain));
  b.part4_dataflow = render_dataflow(traces);

  auto fits = [&] {
    b.token_estimate = estimate_tokens(b.text(), opts.chars_per_token);
    return b.token_estimate <= opts.budget;
  };
  auto rank_of = [&](const std::string& name) {
    auto it = std::find(sel.ranked.begin(), sel.ranked.end(), name);
    return it - sel.ranked.begin();
  };
  while (!fits() && !b.context_names.empty()) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < b.context_names.size(); ++i) {
      if (rank_of(b.context_names[i]) > rank_of(b.context_names[worst])) worst = i;
    }
    b.dropped_context.push_back(b.context_names[worst]);
    b.context_names.erase(b.context_names.begin() + static_cast<long>(worst));
    b.part2_context.erase(b.part2_context.begin() + static_cast<long>(worst));
  }
  while (!fits() && !b.part3_chains.empty()) {
    b.part3_chains.pop_back();
    ++b.dropped_chains;
  }
  if (!fits()) {
    b.dropped_annotations = true;
    b.part4_dataflow.clear();
    b.part1_target = target->source();
    fits();
  }
  return b;
}

nlohmann::json to_json(const PromptBundle& b) {
  return {{"target", b.target_name},
          {"context_functions", b.context_names},
          {"chains", b.part3_chains},
          {"dataflow", b.part4_dataflow},
          {"task", b.part5_task},
          {"thinking_tag", b.thinking_tag},
          {"token_estimate", b.token_estimate},
          {"budget", b.budget},
          {"dropped",
           {{"context", b.dropped_context},
            {"chains", b.dropped_chains},
            {"annotations", b.dropped_annotations}}},
          {"text", b.text()}};
}

}  // namespace recon::promptkit
