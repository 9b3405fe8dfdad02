#pragma once

// Brute-force reference for the tracer: every round re-applies every rule to
// every statement of every function (Jacobi iteration) until nothing changes,
// then replays all statements once to log usages. Shares only the parser with
// the library.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "recon/cgraph/graph.hpp"
#include "recon/pseudoc/ast.hpp"

namespace recon::oracle {

struct OracleUsage {
  std::string function;
  int line;
  std::string variable;
  std::string rule;
  auto operator<=>(const OracleUsage&) const = default;
};

struct OracleResult {
  std::map<std::pair<std::string, std::string>, std::string> primary;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> all_aliases;
  std::set<OracleUsage> usages;
};

namespace detail {

using pseudoc::AstKind;
using pseudoc::AstNode;
using Pair = std::pair<std::string, std::string>;

inline const AstNode& nocast(const AstNode& n) {
  return n.kind == AstKind::Cast ? nocast(n.children[0]) : n;
}

struct Form {
  char shape;  // 'v' var, '*', '&', '[', '.', '>'
  std::string base;
  std::string extra;
};

inline bool declared(const pseudoc::PseudoFunction& fn, const std::string& name) {
  for (const auto& p : fn.params) {
    if (p.name == name) return true;
  }
  for (const auto& l : fn.locals) {
    if (l.name == name) return true;
  }
  return false;
}

inline std::optional<Form> form_of(const AstNode& raw, const pseudoc::PseudoFunction& fn) {
  const AstNode& e = nocast(raw);
  auto var = [&](const AstNode& n) -> std::optional<std::string> {
    const AstNode& x = nocast(n);
    if (x.kind == AstKind::Identifier && declared(fn, x.text)) return x.text;
    return std::nullopt;
  };
  if (auto v = var(e)) return Form{'v', *v, ""};
  if (e.kind == AstKind::UnaryOp && (e.op == "*" || e.op == "&")) {
    if (auto v = var(e.children[0])) return Form{e.op[0], *v, ""};
  }
  if (e.kind == AstKind::Index) {
    if (auto v = var(e.children[0])) return Form{'[', *v, e.children[1].text};
  }
  if (e.kind == AstKind::Member) {
    if (auto v = var(e.children[0])) return Form{e.op == "." ? '.' : '>', *v, e.type_text};
  }
  return std::nullopt;
}

inline bool top_level_additive(const std::string& a) {
  int depth = 0;
  for (std::size_t i = 0; i + 2 < a.size(); ++i) {
    if (a[i] == '(' || a[i] == '[') ++depth;
    if (a[i] == ')' || a[i] == ']') --depth;
    if (!depth && a.compare(i, 3, " + ") == 0) return true;
    if (!depth && a.compare(i, 3, " - ") == 0) return true;
  }
  return false;
}

inline std::string unary(char op, const std::string& a) {
  char other = op == '*' ? '&' : '*';
  if (!a.empty() && a[0] == other && !top_level_additive(a)) {
    std::string rest = a.substr(1);
    // strip one pair of enclosing parentheses if they wrap everything
    if (rest.size() >= 2 && rest.front() == '(' && rest.back() == ')') {
      int depth = 0;
      bool wraps = true;
      for (std::size_t i = 0; i < rest.size(); ++i) {
        depth += rest[i] == '(' ? 1 : rest[i] == ')' ? -1 : 0;
        if (depth == 0 && i + 1 < rest.size()) wraps = false;
      }
      if (wraps) rest = rest.substr(1, rest.size() - 2);
    }
    return rest;
  }
  return top_level_additive(a) ? std::string(1, op) + "(" + a + ")" : std::string(1, op) + a;
}

inline std::string wrap(const Form& f, const std::string& a) {
  bool paren = top_level_additive(a) || (!a.empty() && (a[0] == '*' || a[0] == '&'));
  std::string b = paren ? "(" + a + ")" : a;
  switch (f.shape) {
    case 'v': return a;
    case '*': return unary('*', a);
    case '&': return unary('&', a);
    case '[': return b + "[" + f.extra + "]";
    case '.': return b + "." + f.extra;
    default: return b + "->" + f.extra;
  }
}

inline std::optional<std::string> unwrap(const Form& f, const std::string& a) {
  if (f.shape == 'v') return a;
  if (f.shape == '*') return unary('&', a);
  if (f.shape == '&') return unary('*', a);
  return std::nullopt;
}

inline bool shorter(const std::string& a, const std::string& b) {
  return a.size() != b.size() ? a.size() < b.size() : a < b;
}

inline int rule_rank(const std::string& r) {
  static const std::vector<std::string> order = {"Def", "Caller", "CalleeSimple", "CalleeExpr",
                                                 "AssignLR", "AssignRL", "Expr"};
  return static_cast<int>(std::find(order.begin(), order.end(), r) - order.begin());
}

// Statement roots in source order, mirroring how statements are scoped.
inline void roots(const AstNode& s, std::vector<const AstNode*>& out) {
  switch (s.kind) {
    case AstKind::Block:
      for (const auto& c : s.children) roots(c, out);
      return;
    case AstKind::If:
      out.push_back(&s.children[0]);
      for (std::size_t i = 1; i < s.children.size(); ++i) roots(s.children[i], out);
      return;
    case AstKind::While:
      if (s.op == "do") {
        roots(s.children[0], out);
        out.push_back(&s.children[1]);
      } else {
        out.push_back(&s.children[0]);
        roots(s.children[1], out);
      }
      return;
    case AstKind::For:
      for (int i = 0; i < 3; ++i) {
        if (s.children[i].kind == AstKind::Block) {
          for (const auto& d : s.children[i].children) out.push_back(&d);
        } else if (!(s.children[i].kind == AstKind::Opaque)) {
          out.push_back(&s.children[i]);
        }
      }
      roots(s.children[3], out);
      return;
    case AstKind::Return:
    case AstKind::Label:
      if (!s.children.empty() && s.children[0].kind != AstKind::Opaque) out.push_back(&s.children[0]);
      return;
    case AstKind::Opaque:
    case AstKind::Break:
    case AstKind::Goto:
      return;
    case AstKind::Decl:
      if (s.children.size() > 1) out.push_back(&s);
      return;
    default:
      out.push_back(&s);
  }
}

inline void calls_in(const AstNode& n, std::vector<const AstNode*>& out) {
  if (n.kind == AstKind::Opaque) return;
  if (n.kind == AstKind::Call) out.push_back(&n);
  for (const auto& c : n.children) calls_in(c, out);
}

inline void idents_in(const AstNode& n, const pseudoc::PseudoFunction& fn, std::set<std::string>& out) {
  if (n.kind == AstKind::Opaque) return;
  if (n.kind == AstKind::Identifier && declared(fn, n.text)) out.insert(n.text);
  for (const auto& c : n.children) idents_in(c, fn, out);
}

struct Cand {
  Pair pair;
  std::string alias;
  std::string rule;
  std::string source;
  // usage logged by this application: (function, line, variable)
  std::string log_fn;
  int log_line;
  std::string log_var;
  std::string depth_kind;  // "f", "b" or ""
  std::string depth_fn;
  int depth_value = 0;
  int log_root = 0;
};

struct Root {
  const pseudoc::PseudoFunction* fn;
  const AstNode* node;
  int index;
};

}  // namespace detail

inline OracleResult brute_force_trace(const cgraph::CallGraph& graph, const std::string& target,
                                      const std::string& var, int depth_callee, int depth_caller) {
  using namespace detail;
  std::map<std::string, std::vector<Root>> all_roots;
  for (const auto& name : graph.names()) {
    const auto* fn = graph.function(name);
    if (!fn) continue;
    std::vector<const AstNode*> rs;
    roots(fn->ast.children[1], rs);
    int i = 0;
    for (const auto* r : rs) all_roots[name].push_back({fn, r, i++});
  }

  std::map<Pair, std::tuple<std::string, std::string, std::string>> state;  // alias, rule, source
  std::map<std::string, int> fd{{target, 0}}, bd{{target, 0}};
  state[{target, var}] = {var + "@" + target, "Def", "origin"};

  auto traced = [&](const std::string& f, const std::string& v) -> const std::string* {
    auto it = state.find({f, v});
    return it == state.end() ? nullptr : &std::get<0>(it->second);
  };

  // Every rule application possible in the current state.
  auto apply_all = [&]() {
    std::vector<Cand> out;
    for (const auto& [fname, rs] : all_roots) {
      bool fwd = fd.count(fname) && fd[fname] < depth_callee;
      for (const auto& r : rs) {
        const auto& fn = *r.fn;
        const AstNode& n = *r.node;
        int line = n.span.line_begin;
        std::optional<Form> lhs, rhs;
        if (n.kind == AstKind::Decl && n.children[1].kind != AstKind::Opaque) {
          lhs = Form{'v', n.children[0].text, ""};
          rhs = form_of(n.children[1], fn);
        } else if (n.kind == AstKind::Assign && n.op == "=") {
          lhs = form_of(n.children[0], fn);
          rhs = form_of(n.children[1], fn);
        }
        if (lhs && rhs) {
          std::string src = fname + "#" + std::to_string(r.index);
          if (const auto* a = traced(fname, rhs->base)) {
            if (auto x = unwrap(*lhs, wrap(*rhs, *a))) {
              out.push_back({{fname, lhs->base}, *x, "AssignLR", src + "#lr", fname, line, rhs->base, "", "", 0, r.index});
            }
          }
          if (const auto* a = traced(fname, lhs->base)) {
            if (auto x = unwrap(*rhs, wrap(*lhs, *a))) {
              out.push_back({{fname, rhs->base}, *x, "AssignRL", src + "#rl", fname, line, lhs->base, "", "", 0, r.index});
            }
          }
        }
        if (!fwd) continue;
        std::vector<const AstNode*> calls;
        calls_in(n, calls);
        for (std::size_t ci = 0; ci < calls.size(); ++ci) {
          const AstNode& callee_node = nocast(calls[ci]->children[0]);
          if (callee_node.kind != AstKind::Identifier) continue;
          const auto* g = graph.function(callee_node.text);
          if (!g) continue;
          for (std::size_t i = 1; i < calls[ci]->children.size() && i - 1 < g->params.size(); ++i) {
            const AstNode& arg = calls[ci]->children[i];
            Pair dst{g->name(), g->params[i - 1].name};
            std::string src = fname + "#" + std::to_string(r.index) + "#call" + std::to_string(ci) + "#" +
                              std::to_string(i - 1);
            if (auto f = form_of(arg, fn)) {
              if (const auto* a = traced(fname, f->base)) {
                out.push_back({dst, wrap(*f, *a), "CalleeSimple", src, fname, line, f->base, "f", g->name(),
                               fd[fname] + 1, r.index});
              }
              continue;
            }
            const AstNode& e = nocast(arg);
            if (e.kind != AstKind::BinaryOp || (e.op != "+" && e.op != "-")) continue;
            auto l = form_of(e.children[0], fn);
            if (l && traced(fname, l->base)) {
              out.push_back({dst, wrap(*l, *traced(fname, l->base)) + " " + e.op + " " + e.children[1].text,
                             "CalleeExpr", src, fname, line, l->base, "f", g->name(), fd[fname] + 1, r.index});
              continue;
            }
            auto rr = form_of(e.children[1], fn);
            if (e.op == "+" && rr && traced(fname, rr->base)) {
              out.push_back({dst, wrap(*rr, *traced(fname, rr->base)) + " + " + e.children[0].text,
                             "CalleeExpr", src, fname, line, rr->base, "f", g->name(), fd[fname] + 1, r.index});
            }
          }
        }
      }
    }
    // Rule (e): scan every call in every function for calls into a function
    // whose backward depth allows another hop.
    for (const auto& [cname, rs] : all_roots) {
      for (const auto& r : rs) {
        std::vector<const AstNode*> calls;
        calls_in(*r.node, calls);
        for (std::size_t ci = 0; ci < calls.size(); ++ci) {
          const AstNode& callee_node = nocast(calls[ci]->children[0]);
          if (callee_node.kind != AstKind::Identifier) continue;
          const std::string& f = callee_node.text;
          if (!bd.count(f) || bd[f] >= depth_caller) continue;
          const auto* fn_f = graph.function(f);
          if (!fn_f || !graph.callers(f).count(cname)) continue;
          for (std::size_t i = 1; i < calls[ci]->children.size() && i - 1 < fn_f->params.size(); ++i) {
            const auto* a = traced(f, fn_f->params[i - 1].name);
            if (!a) continue;
            auto form = form_of(calls[ci]->children[i], *r.fn);
            if (!form) continue;
            auto x = unwrap(*form, *a);
            if (!x) continue;
            std::string src = cname + "#" + std::to_string(r.index) + "#back" + std::to_string(ci) + "#" +
                              std::to_string(i - 1);
            out.push_back({{cname, form->base}, *x, "Caller", src, cname, r.node->span.line_begin, form->base,
                           "b", cname, bd[f] + 1, r.index});
          }
        }
      }
    }
    return out;
  };

  while (true) {
    auto cands = apply_all();
    bool changed = false;
    std::map<Pair, Cand> best;
    for (const auto& c : cands) {
      if (state.count(c.pair)) continue;
      auto it = best.find(c.pair);
      auto better = [&](const Cand& a, const Cand& b) {
        if (a.alias != b.alias) return shorter(a.alias, b.alias);
        if (a.rule != b.rule) return rule_rank(a.rule) < rule_rank(b.rule);
        return a.source < b.source;
      };
      if (it == best.end() || better(c, it->second)) best[c.pair] = c;
    }
    for (const auto& [p, c] : best) {
      state[p] = {c.alias, c.rule, c.source};
      changed = true;
    }
    for (const auto& c : cands) {
      if (c.depth_kind.empty()) continue;
      auto& m = c.depth_kind == "f" ? fd : bd;
      auto it = m.find(c.depth_fn);
      if (it == m.end() || c.depth_value < it->second) {
        m[c.depth_fn] = c.depth_value;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Final replay for alias lists and usages.
  OracleResult res;
  for (const auto& [p, st] : state) {
    res.primary[p] = std::get<0>(st);
    res.all_aliases[p].insert(std::get<0>(st));
  }
  std::map<std::tuple<std::string, int, std::string>, std::string> logged;
  auto log = [&](const std::string& f, int line, const std::string& v, const std::string& rule) {
    auto key = std::make_tuple(f, line, v);
    auto it = logged.find(key);
    if (it == logged.end() || rule_rank(rule) < rule_rank(it->second)) logged[key] = rule;
  };
  log(target, graph.function(target)->find_var(var)->line, var, "Def");
  auto cands = apply_all();
  std::set<std::tuple<std::string, int, std::string>> claimed;  // (fn, root index, var) explained by a rule
  std::map<Pair, std::string> entry;
  for (const auto& c : cands) {
    if (!state.count(c.pair)) continue;
    res.all_aliases[c.pair].insert(c.alias);
    bool echo = false;
    if (c.rule == "AssignLR" || c.rule == "AssignRL") {
      // The variable that received its alias from this very statement is
      // not itself a usage here.
      std::string mirror = c.source.substr(0, c.source.size() - 2) + (c.rule == "AssignLR" ? "rl" : "lr");
      echo = std::get<2>(state.at({c.log_fn, c.log_var})) == mirror;
    }
    if (!echo) log(c.log_fn, c.log_line, c.log_var, c.rule);
    claimed.insert({c.log_fn, c.log_root, c.log_var});
    if (c.rule == "CalleeSimple" || c.rule == "CalleeExpr") {
      auto it = entry.find(c.pair);
      if (it == entry.end() || rule_rank(c.rule) < rule_rank(it->second)) entry[c.pair] = c.rule;
    }
  }
  for (const auto& [p, rule] : entry) {
    log(p.first, graph.function(p.first)->find_var(p.second)->line, p.second, rule);
  }
  std::set<std::string> live;
  for (const auto& [p, _] : state) live.insert(p.first);
  for (const auto& f : live) {
    for (const auto& r : all_roots[f]) {
      std::set<std::string> ids;
      idents_in(*r.node, *r.fn, ids);
      for (const auto& v : ids) {
        if (!state.count({f, v})) continue;
        if (claimed.count({f, r.index, v})) continue;
        log(f, r.node->span.line_begin, v, "Expr");
      }
    }
  }
  for (const auto& [key, rule] : logged) {
    res.usages.insert({std::get<0>(key), std::get<1>(key), std::get<2>(key), rule});
  }
  return res;
}

}  // namespace recon::oracle
