#include "recon/dflow/trace.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include <nlohmann/json.hpp>

#include "recon/dflow/alias.hpp"
#include "recon/error.hpp"

namespace recon::dflow {

using pseudoc::AstKind;
using pseudoc::AstNode;
using pseudoc::PseudoFunction;

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::Def: return "Def";
    case Rule::Expr: return "Expr";
    case Rule::AssignLR: return "AssignLR";
    case Rule::AssignRL: return "AssignRL";
    case Rule::CalleeSimple: return "CalleeSimple";
    case Rule::CalleeExpr: return "CalleeExpr";
    case Rule::Caller: return "Caller";
  }
  return "?";
}

std::set<std::string> TraceReport::functions() const {
  std::set<std::string> out;
  for (const auto& [ref, _] : aliases) out.insert(ref.function);
  return out;
}

namespace {

// Lower value wins when several rules log the same (function, line, var).
int strength(Rule r) {
  switch (r) {
    case Rule::Def: return 0;
    case Rule::Caller: return 1;
    case Rule::CalleeSimple: return 2;
    case Rule::CalleeExpr: return 3;
    case Rule::AssignLR: return 4;
    case Rule::AssignRL: return 5;
    case Rule::Expr: return 6;
  }
  return 7;
}

// ---- per-function flow model ----------------------------------------------

struct RefineOption {
  SimpleForm form;
  std::string op;
  std::string other;
};

struct ArgModel {
  std::optional<SimpleForm> simple;
  std::vector<RefineOption> refine;
};

struct CallModel {
  std::string callee;
  std::vector<ArgModel> args;
};

struct UnitModel {
  int line = 0;
  std::optional<SimpleForm> lhs;
  std::optional<SimpleForm> rhs;
  std::vector<CallModel> calls;
  std::vector<std::string> vars;  // declared variables occurring in the unit
};

struct FunctionModel {
  const PseudoFunction* fn = nullptr;
  std::vector<UnitModel> units;
  std::map<std::string, std::vector<std::size_t>> units_by_var;
  std::map<std::string, std::vector<std::size_t>> units_by_callee;
};

void unit_roots(const AstNode& stmt, std::vector<const AstNode*>& out) {
  switch (stmt.kind) {
    case AstKind::Block:
      for (const auto& c : stmt.children) unit_roots(c, out);
      break;
    case AstKind::If:
      out.push_back(&stmt.children[0]);
      for (std::size_t i = 1; i < stmt.children.size(); ++i) unit_roots(stmt.children[i], out);
      break;
    case AstKind::While:
      if (stmt.op == "do") {
        unit_roots(stmt.children[0], out);
        out.push_back(&stmt.children[1]);
      } else {
        out.push_back(&stmt.children[0]);
        unit_roots(stmt.children[1], out);
      }
      break;
    case AstKind::For:
      for (int i = 0; i < 3; ++i) {
        const auto& clause = stmt.children[i];
        if (clause.kind == AstKind::Block) {
          for (const auto& d : clause.children) out.push_back(&d);
        } else {
          out.push_back(&clause);
        }
      }
      unit_roots(stmt.children[3], out);
      break;
    case AstKind::Return:
      if (!stmt.children.empty()) out.push_back(&stmt.children[0]);
      break;
    case AstKind::Label:
      if (!stmt.children.empty()) out.push_back(&stmt.children[0]);
      break;
    case AstKind::Opaque:
    case AstKind::Break:
    case AstKind::Goto:
      break;
    case AstKind::Decl:
      if (stmt.children.size() > 1) out.push_back(&stmt);
      break;
    default:
      out.push_back(&stmt);
      break;
  }
}

ArgModel arg_model(const AstNode& arg, const PseudoFunction& fn) {
  ArgModel m;
  m.simple = simple_form(arg, fn);
  const AstNode& e = pseudoc::strip_casts(arg);
  if (!m.simple && e.kind == AstKind::BinaryOp && (e.op == "+" || e.op == "-")) {
    auto left = simple_form(e.children[0], fn);
    auto right = simple_form(e.children[1], fn);
    if (left) m.refine.push_back({*left, e.op, e.children[1].text});
    if (right && e.op == "+") m.refine.push_back({*right, e.op, e.children[0].text});
  }
  return m;
}

UnitModel unit_model(const AstNode& root, const PseudoFunction& fn) {
  UnitModel u;
  u.line = root.span.line_begin;
  if (root.kind == AstKind::Decl) {
    const AstNode& id = root.children[0];
    if (fn.find_var(id.text) && root.children[1].kind != AstKind::Opaque) {
      u.lhs = SimpleForm{Shape::Var, id.text, ""};
      u.rhs = simple_form(root.children[1], fn);
    }
  } else if (root.kind == AstKind::Assign && root.op == "=") {
    u.lhs = simple_form(root.children[0], fn);
    u.rhs = simple_form(root.children[1], fn);
  }
  if (!u.lhs || !u.rhs) {
    u.lhs.reset();
    u.rhs.reset();
  }
  pseudoc::walk(root, [&](const AstNode& n) {
    if (n.kind == AstKind::Opaque) return false;
    if (n.kind == AstKind::Identifier && fn.find_var(n.text) &&
        std::find(u.vars.begin(), u.vars.end(), n.text) == u.vars.end()) {
      u.vars.push_back(n.text);
    }
    if (n.kind == AstKind::Call) {
      CallModel call;
      const AstNode& callee = pseudoc::strip_casts(n.children[0]);
      if (callee.kind == AstKind::Identifier) call.callee = callee.text;
      for (std::size_t i = 1; i < n.children.size(); ++i) call.args.push_back(arg_model(n.children[i], fn));
      u.calls.push_back(std::move(call));
    }
    return true;
  });
  return u;
}

FunctionModel build_model(const PseudoFunction& fn) {
  FunctionModel m;
  m.fn = &fn;
  std::vector<const AstNode*> roots;
  if (fn.ast.children.size() > 1) unit_roots(fn.ast.children[1], roots);
  for (const auto* root : roots) {
    if (root->kind == AstKind::Opaque) continue;
    m.units.push_back(unit_model(*root, fn));
  }
  for (std::size_t i = 0; i < m.units.size(); ++i) {
    for (const auto& v : m.units[i].vars) m.units_by_var[v].push_back(i);
    for (const auto& c : m.units[i].calls) {
      auto& list = m.units_by_callee[c.callee];
      if (list.empty() || list.back() != i) list.push_back(i);
    }
  }
  return m;
}

// ---- engine -----------------------------------------------------------------

struct Candidate {
  std::string alias;
  Rule rule;
  std::string source;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.alias != b.alias) return alias_less(a.alias, b.alias);
  if (a.rule != b.rule) return strength(a.rule) < strength(b.rule);
  return a.source < b.source;
}

struct PairState {
  std::string primary;
  Rule rule = Rule::Def;
  std::string source;
};

std::string unit_source(const std::string& fn, std::size_t unit, const char* dir) {
  return fn + "#" + std::to_string(unit) + "#" + dir;
}

class Engine {
 public:
  Engine(const cgraph::CallGraph& graph, const cgraph::ContextConfig& cfg) : graph_(graph), cfg_(cfg) {}

  TraceReport run(const std::string& target, const std::string& var) {
    auto started = std::chrono::steady_clock::now();
    const PseudoFunction* fn = graph_.function(target);
    if (!graph_.contains(target) || !fn) {
      throw Error(ErrorCode::UnknownFunction, "no parsed function named '" + target + "'");
    }
    if (!fn->find_var(var)) {
      throw Error(ErrorCode::UnknownVariable, "'" + var + "' is not a parameter or local of " + target);
    }
    reset();
    VarRef origin{target, var};
    traced_[origin] = {origin_alias(var, target), Rule::Def, "origin"};
    fdepth_[target] = 0;
    bdepth_[target] = 0;
    entry_round_[target] = 0;

    std::set<VarRef> frontier{origin};
    std::set<std::string> depth_dirty_f, depth_dirty_b;
    int round = 0;
    while (!frontier.empty() || !depth_dirty_f.empty() || !depth_dirty_b.empty()) {
      ++round;
      cands_.clear();
      fupdates_.clear();
      bupdates_.clear();
      for (const auto& ref : frontier) {
        const auto& m = model(ref.function);
        auto it = m.units_by_var.find(ref.variable);
        if (it != m.units_by_var.end()) {
          for (auto idx : it->second) eval_unit(ref.function, idx, nullptr);
        }
        if (is_param(ref)) eval_callers(ref.function, &ref.variable);
      }
      for (const auto& f : depth_dirty_f) {
        const auto& m = model(f);
        for (std::size_t i = 0; i < m.units.size(); ++i) eval_calls(f, i, nullptr);
      }
      for (const auto& f : depth_dirty_b) eval_callers(f, nullptr);

      std::set<VarRef> next;
      for (auto& [ref, list] : cands_) {
        if (traced_.count(ref)) continue;
        const auto& best = *std::min_element(list.begin(), list.end(), candidate_less);
        traced_[ref] = {best.alias, best.rule, best.source};
        entry_round_.emplace(ref.function, round);
        next.insert(ref);
      }
      depth_dirty_f.clear();
      depth_dirty_b.clear();
      for (const auto& [f, d] : fupdates_) {
        auto it = fdepth_.find(f);
        if (it == fdepth_.end() || d < it->second) {
          fdepth_[f] = d;
          depth_dirty_f.insert(f);
        }
      }
      for (const auto& [f, d] : bupdates_) {
        auto it = bdepth_.find(f);
        if (it == bdepth_.end() || d < it->second) {
          bdepth_[f] = d;
          depth_dirty_b.insert(f);
        }
      }
      frontier = std::move(next);
    }

    TraceReport report = finish(origin);
    report.stats.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
  }

 private:
  void reset() {
    traced_.clear();
    fdepth_.clear();
    bdepth_.clear();
    entry_round_.clear();
  }

  const FunctionModel& model(const std::string& name) {
    auto it = models_.find(name);
    if (it != models_.end()) return it->second;
    return models_.emplace(name, build_model(*graph_.function(name))).first->second;
  }

  const PairState* state(const std::string& fn, const std::string& var) const {
    auto it = traced_.find(VarRef{fn, var});
    return it == traced_.end() ? nullptr : &it->second;
  }

  bool is_param(const VarRef& ref) const {
    const auto* fn = graph_.function(ref.function);
    for (const auto& p : fn->params) {
      if (p.name == ref.variable) return true;
    }
    return false;
  }

  bool forward_active(const std::string& f) const {
    auto it = fdepth_.find(f);
    return it != fdepth_.end() && it->second < cfg_.depth_callee;
  }

  bool backward_active(const std::string& f) const {
    auto it = bdepth_.find(f);
    return it != bdepth_.end() && it->second < cfg_.depth_caller;
  }

  void propose(const std::string& fn, const std::string& var, Candidate c) {
    if (sink_) {
      sink_(VarRef{fn, var}, c);
      return;
    }
    cands_[VarRef{fn, var}].push_back(std::move(c));
  }

  // Applies rules (c) and (d) of one unit. When `events` is set the unit is
  // being replayed on the final state to log usages.
  struct Event {
    std::string var;
    Rule rule;
    bool silent = false;  // the target of this very assignment: no usage
  };

  void eval_unit(const std::string& f, std::size_t idx, std::vector<Event>* events) {
    const auto& u = model(f).units[idx];
    if (u.lhs && u.rhs) {
      const auto* r = state(f, u.rhs->base);
      if (r) {
        if (auto a = invert_shape(*u.lhs, apply_shape(*u.rhs, r->primary))) {
          propose(f, u.lhs->base, {*a, Rule::AssignLR, unit_source(f, idx, "lr")});
          if (events) events->push_back({u.rhs->base, Rule::AssignLR, r->source == unit_source(f, idx, "rl")});
        }
      }
      const auto* l = state(f, u.lhs->base);
      if (l) {
        if (auto a = invert_shape(*u.rhs, apply_shape(*u.lhs, l->primary))) {
          propose(f, u.rhs->base, {*a, Rule::AssignRL, unit_source(f, idx, "rl")});
          if (events) events->push_back({u.lhs->base, Rule::AssignRL, l->source == unit_source(f, idx, "lr")});
        }
      }
    }
    eval_calls(f, idx, events);
  }

  void eval_calls(const std::string& f, std::size_t idx, std::vector<Event>* events) {
    if (!forward_active(f)) return;
    const auto& u = model(f).units[idx];
    int depth = fdepth_.at(f) + 1;
    for (std::size_t c = 0; c < u.calls.size(); ++c) {
      const auto& call = u.calls[c];
      const PseudoFunction* callee = call.callee.empty() ? nullptr : graph_.function(call.callee);
      if (!callee) continue;
      std::string site = f + "#" + std::to_string(idx) + "#call" + std::to_string(c);
      std::size_t n = std::min(call.args.size(), callee->params.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& arg = call.args[i];
        const auto& param = callee->params[i].name;
        std::string src = site + "#" + std::to_string(i);
        if (arg.simple) {
          if (const auto* s = state(f, arg.simple->base)) {
            propose(callee->name(), param, {apply_shape(*arg.simple, s->primary), Rule::CalleeSimple, src});
            lower(fupdates_, callee->name(), depth);
            if (events) events->push_back({arg.simple->base, Rule::CalleeSimple});
          }
          continue;
        }
        for (const auto& opt : arg.refine) {
          const auto* s = state(f, opt.form.base);
          if (!s) continue;
          std::string alias = apply_shape(opt.form, s->primary) + " " + opt.op + " " + opt.other;
          propose(callee->name(), param, {alias, Rule::CalleeExpr, src});
          lower(fupdates_, callee->name(), depth);
          if (events) events->push_back({opt.form.base, Rule::CalleeExpr});
          break;
        }
      }
    }
  }

  static void lower(std::map<std::string, int>& depths, const std::string& f, int d) {
    auto [it, fresh] = depths.emplace(f, d);
    if (!fresh) it->second = std::min(it->second, d);
  }

  // Rule (e): traced parameters of `f` flow back into the simple actual
  // arguments of every call to `f` made by its callers. With `only` set, just
  // that parameter is considered.
  void eval_callers(const std::string& f, const std::string* only,
                    std::map<std::string, std::vector<std::pair<std::size_t, Event>>>* events = nullptr) {
    if (!backward_active(f)) return;
    const auto* callee = graph_.function(f);
    int depth = bdepth_.at(f) + 1;
    for (const auto& caller : graph_.callers(f)) {
      if (!graph_.function(caller)) continue;
      const auto& m = model(caller);
      auto it = m.units_by_callee.find(f);
      if (it == m.units_by_callee.end()) continue;
      for (auto idx : it->second) {
        const auto& u = m.units[idx];
        for (std::size_t c = 0; c < u.calls.size(); ++c) {
          if (u.calls[c].callee != f) continue;
          std::size_t n = std::min(u.calls[c].args.size(), callee->params.size());
          for (std::size_t i = 0; i < n; ++i) {
            const auto& param = callee->params[i].name;
            if (only && *only != param) continue;
            const auto* s = state(f, param);
            const auto& arg = u.calls[c].args[i];
            if (!s || !arg.simple) continue;
            auto alias = invert_shape(*arg.simple, s->primary);
            if (!alias) continue;
            std::string src = caller + "#" + std::to_string(idx) + "#back" + std::to_string(c) + "#" +
                              std::to_string(i);
            propose(caller, arg.simple->base, {*alias, Rule::Caller, src});
            lower(bupdates_, caller, depth);
            if (events) (*events)[caller].push_back({idx, {arg.simple->base, Rule::Caller}});
          }
        }
      }
    }
  }

  std::string line_text(const PseudoFunction& fn, int line) {
    auto& lines = lines_cache_[fn.name()];
    if (lines.empty()) lines = fn.lines();
    if (line < 1 || line > static_cast<int>(lines.size())) return {};
    std::string s = lines[line - 1];
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  TraceReport finish(const VarRef& origin) {
    TraceReport report;
    report.origin = origin;

    // Visit order: target, then by entry round and name.
    std::vector<std::pair<int, std::string>> order;
    for (const auto& [f, r] : entry_round_) order.emplace_back(f == origin.function ? -1 : r, f);
    std::sort(order.begin(), order.end());
    std::map<std::string, std::size_t> rank;
    for (const auto& [_, f] : order) {
      rank[f] = report.visit_order.size();
      report.visit_order.push_back(f);
    }

    // Replay every unit on the final state: collects the full alias lists and
    // the usage events.
    std::map<VarRef, std::set<std::string, decltype(&alias_less)>> derived;
    std::map<VarRef, Rule> entry_rule;  // strongest callee rule seen per parameter
    sink_ = [&](const VarRef& ref, const Candidate& c) {
      auto [it, _] = derived.try_emplace(ref, &alias_less);
      it->second.insert(c.alias);
      if (c.rule == Rule::CalleeSimple || c.rule == Rule::CalleeExpr) {
        auto e = entry_rule.find(ref);
        if (e == entry_rule.end() || strength(c.rule) < strength(e->second)) entry_rule[ref] = c.rule;
      }
    };

    struct Key {
      std::size_t fn_rank;
      int line;
      std::string var;
      auto operator<=>(const Key&) const = default;
    };
    std::map<Key, std::pair<Rule, std::string>> usages;  // -> (rule, function)
    auto log = [&](const std::string& f, int line, const std::string& var, Rule rule) {
      Key key{rank.at(f), line, var};
      auto it = usages.find(key);
      if (it == usages.end() || strength(rule) < strength(it->second.first)) usages[key] = {rule, f};
    };

    const auto* target_fn = graph_.function(origin.function);
    log(origin.function, target_fn->find_var(origin.variable)->line, origin.variable, Rule::Def);

    std::map<std::string, std::vector<std::pair<std::size_t, Event>>> caller_events;
    for (const auto& f : report.visit_order) {
      const auto& m = model(f);
      for (std::size_t i = 0; i < m.units.size(); ++i) {
        std::vector<Event> events;
        eval_unit(f, i, &events);
        std::set<std::string> logged;
        for (const auto& ev : events) {
          if (!ev.silent) log(f, m.units[i].line, ev.var, ev.rule);
          logged.insert(ev.var);
        }
        for (const auto& v : m.units[i].vars) {
          if (!logged.count(v) && state(f, v)) log(f, m.units[i].line, v, Rule::Expr);
        }
      }
      eval_callers(f, nullptr, &caller_events);
    }
    for (const auto& [caller, list] : caller_events) {
      const auto& m = model(caller);
      for (const auto& [idx, ev] : list) log(caller, m.units[idx].line, ev.var, ev.rule);
    }
    for (const auto& [ref, rule] : entry_rule) {
      if (!traced_.count(ref)) continue;
      log(ref.function, graph_.function(ref.function)->find_var(ref.variable)->line, ref.variable, rule);
    }
    sink_ = nullptr;

    for (const auto& [ref, st] : traced_) {
      std::vector<std::string> list{st.primary};
      auto it = derived.find(ref);
      if (it != derived.end()) {
        for (const auto& a : it->second) {
          if (a != st.primary) list.push_back(a);
        }
      }
      report.aliases[ref] = std::move(list);
    }
    for (const auto& [key, val] : usages) {
      const auto& [rule, f] = val;
      UsageRecord u;
      u.function = f;
      u.line = key.line;
      u.variable = key.var;
      u.rule = rule;
      u.alias = traced_.at(VarRef{f, key.var}).primary;
      u.statement_text = line_text(*graph_.function(f), key.line);
      report.usages.push_back(std::move(u));
    }
    report.stats.functions_visited = static_cast<int>(report.visit_order.size());
    return report;
  }

  const cgraph::CallGraph& graph_;
  cgraph::ContextConfig cfg_;
  std::map<std::string, FunctionModel> models_;
  std::map<std::string, std::vector<std::string>> lines_cache_;
  std::map<VarRef, PairState> traced_;
  std::map<std::string, int> fdepth_, bdepth_, entry_round_;
  std::map<VarRef, std::vector<Candidate>> cands_;
  std::map<std::string, int> fupdates_, bupdates_;
  std::function<void(const VarRef&, const Candidate&)> sink_;
};

}  // namespace

TraceReport trace_variable(const cgraph::CallGraph& graph, const std::string& target,
                           const std::string& var, const cgraph::ContextConfig& cfg) {
  return Engine(graph, cfg).run(target, var);
}

std::vector<TraceReport> trace_all(const cgraph::CallGraph& graph, const std::string& target,
                                   const cgraph::ContextConfig& cfg) {
  const auto* fn = graph.function(target);
  if (!graph.contains(target) || !fn) {
    throw Error(ErrorCode::UnknownFunction, "no parsed function named '" + target + "'");
  }
  Engine engine(graph, cfg);
  std::vector<TraceReport> out;
  for (const auto& p : fn->params) out.push_back(engine.run(target, p.name));
  for (const auto& l : fn->locals) out.push_back(engine.run(target, l.name));
  return out;
}

std::map<std::string, std::string> annotate(const std::vector<const PseudoFunction*>& functions,
                                            const std::vector<TraceReport>& reports) {
  std::map<std::string, std::string> out;
  for (const auto* fn : functions) {
    // line -> ordered (var -> aliases)
    std::map<int, std::vector<std::pair<std::string, std::vector<std::string>>>> notes;
    for (const auto& report : reports) {
      for (const auto& u : report.usages) {
        if (u.function != fn->name()) continue;
        auto& entries = notes[u.line];
        auto it = std::find_if(entries.begin(), entries.end(),
                               [&](const auto& e) { return e.first == u.variable; });
        if (it == entries.end()) {
          entries.emplace_back(u.variable, std::vector<std::string>{});
          it = std::prev(entries.end());
        }
        for (const auto& a : report.aliases.at(VarRef{u.function, u.variable})) {
          if (std::find(it->second.begin(), it->second.end(), a) == it->second.end()) it->second.push_back(a);
        }
      }
    }
    if (notes.empty()) {
      out[fn->name()] = fn->source();
      continue;
    }
    const std::string& src = fn->source();
    std::string text;
    int line = 1;
    std::size_t start = 0;
    while (start <= src.size()) {
      auto nl = src.find('\n', start);
      std::size_t end = nl == std::string::npos ? src.size() : nl;
      text.append(src, start, end - start);
      auto it = notes.find(line);
      if (it != notes.end()) {
        // Keep a trailing '\r' at the very end of the line.
        bool cr = end > start && src[end - 1] == '\r';
        if (cr) text.pop_back();
        text += " // ";
        for (std::size_t i = 0; i < it->second.size(); ++i) {
          if (i) text += ", ";
          text += it->second[i].first + " ~ alias of ";
          for (std::size_t j = 0; j < it->second[i].second.size(); ++j) {
            if (j) text += " or ";
            text += it->second[i].second[j];
          }
        }
        if (cr) text += '\r';
      }
      if (nl == std::string::npos) break;
      text += '\n';
      start = nl + 1;
      ++line;
    }
    out[fn->name()] = std::move(text);
  }
  return out;
}

std::map<std::string, std::string> annotate(const std::vector<const PseudoFunction*>& functions,
                                            const TraceReport& report) {
  return annotate(functions, std::vector<TraceReport>{report});
}

nlohmann::json to_json(const TraceReport& report) {
  nlohmann::json usages = nlohmann::json::array();
  for (const auto& u : report.usages) {
    usages.push_back({{"function", u.function},
                      {"line", u.line},
                      {"statement", u.statement_text},
                      {"variable", u.variable},
                      {"alias", u.alias},
                      {"rule", to_string(u.rule)}});
  }
  nlohmann::json aliases = nlohmann::json::array();
  for (const auto& [ref, list] : report.aliases) {
    aliases.push_back({{"function", ref.function}, {"variable", ref.variable}, {"aliases", list}});
  }
  return {{"origin", {{"function", report.origin.function}, {"variable", report.origin.variable}}},
          {"usages", usages},
          {"aliases", aliases},
          {"visit_order", report.visit_order},
          {"stats",
           {{"functions_visited", report.stats.functions_visited},
            {"elapsed_seconds", report.stats.elapsed_seconds}}}};
}

}  // namespace recon::dflow
