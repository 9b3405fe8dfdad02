#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "c_tree.hpp"
#include "recon/bench/metrics.hpp"

namespace recon::bench {

namespace {

using detail::CNode;

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

using Ngram = std::vector<std::string_view>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string_view>& toks, std::size_t n) {
  std::map<Ngram, int> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[Ngram(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
  }
  return out;
}

double brevity_penalty(std::size_t ref_len, std::size_t hyp_len) {
  if (hyp_len > ref_len) return 1.0;
  if (hyp_len == 0) return 0.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

// Corpus BLEU over a single pair with method-1 smoothing (epsilon 0.1).
// `keywords` switches to the recall form with unigram keyword weights.
double bleu(const std::vector<std::string_view>& ref, const std::vector<std::string_view>& hyp,
            const std::set<std::string, std::less<>>* keywords) {
  std::array<double, 4> num{};
  std::array<double, 4> den{};
  for (std::size_t n = 1; n <= 4; ++n) {
    auto hc = ngram_counts(hyp, n);
    auto rc = ngram_counts(ref, n);
    double nu = 0;
    double de = 0;
    if (!keywords) {
      for (const auto& [g, c] : hc) {
        auto it = rc.find(g);
        nu += std::min(c, it == rc.end() ? 0 : it->second);
        de += c;
      }
    } else {
      auto weight = [&](const Ngram& g) {
        if (n != 1) return 1.0;
        return keywords->count(g[0]) ? 1.0 : 0.2;
      };
      for (const auto& [g, c] : rc) {
        auto it = hc.find(g);
        nu += std::min(c, it == hc.end() ? 0 : it->second) * weight(g);
        de += c * weight(g);
      }
    }
    num[n - 1] = nu;
    den[n - 1] = std::max(1.0, de);
  }
  if (num[0] == 0) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double nu = num[i] == 0 ? 0.1 : num[i];
    s += 0.25 * std::log(nu / den[i]);
  }
  // The weighted form measures the reference length of a [tokens, weights]
  // pair, which is always 2.
  std::size_t ref_len = keywords ? 2 : ref.size();
  return brevity_penalty(ref_len, hyp.size()) * std::exp(s);
}

// ---- syntax -----------------------------------------------------------------

void collect_subtrees(const CNode& n, std::vector<std::string>& out) {
  out.push_back(detail::sexp(n));
  for (const auto& k : n.kids) {
    if (!k.leaf()) collect_subtrees(k, out);
  }
}

double syntax_match(const CNode& pred, const CNode& gt) {
  std::vector<std::string> ref;
  std::vector<std::string> cand;
  collect_subtrees(gt, ref);
  collect_subtrees(pred, cand);
  std::set<std::string> have(cand.begin(), cand.end());
  std::size_t hit = 0;
  for (const auto& s : ref) hit += have.count(s);
  return ref.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(ref.size());
}

// ---- data flow ----------------------------------------------------------------

struct Flow {
  std::string code;
  int idx;
  std::string rel;
  std::vector<std::string> names;
  std::vector<int> idxs;
};

using States = std::map<std::string, std::vector<int>>;

void sort_by_idx(std::vector<Flow>& flows) {
  std::stable_sort(flows.begin(), flows.end(), [](const Flow& a, const Flow& b) { return a.idx < b.idx; });
}

template <class T>
void union_into(std::vector<T>& into, const std::vector<T>& more) {
  for (const auto& m : more) {
    if (std::find(into.begin(), into.end(), m) == into.end()) into.push_back(m);
  }
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Merges edges with the same (var, position, relation).
std::vector<Flow> dedupe(const std::vector<Flow>& flows) {
  std::vector<Flow> out;
  for (const auto& f : flows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Flow& o) {
      return o.code == f.code && o.idx == f.idx && o.rel == f.rel;
    });
    if (it == out.end()) {
      out.push_back(f);
    } else {
      union_into(it->names, f.names);
      std::vector<int> merged = it->idxs;
      merged.insert(merged.end(), f.idxs.begin(), f.idxs.end());
      it->idxs = sorted_unique(std::move(merged));
    }
  }
  sort_by_idx(out);
  return out;
}

void variable_tokens(const CNode& n, std::vector<const CNode*>& out) {
  if (n.token()) {
    if (n.type != n.text) out.push_back(&n);
    return;
  }
  for (const auto& k : n.kids) variable_tokens(k, out);
}

const CNode* field_child(const CNode& n, std::string_view field) {
  for (const auto& k : n.kids) {
    if (k.field == field) return &k;
  }
  return nullptr;
}

std::vector<Flow> dfg(const CNode& n, States& states) {
  std::vector<Flow> out;
  if (n.token()) {
    if (n.type == n.text) return out;
    auto it = states.find(n.text);
    if (it != states.end()) {
      out.push_back({n.text, n.idx, "comesFrom", {n.text}, it->second});
    } else {
      if (n.type == "identifier") states[n.text] = {n.idx};
      out.push_back({n.text, n.idx, "comesFrom", {}, {}});
    }
    return out;
  }
  if (n.type == "assignment_expression") {
    const CNode* left = field_child(n, "left");
    const CNode* right = field_child(n, "right");
    if (right) out = dfg(*right, states);
    std::vector<const CNode*> names;
    std::vector<const CNode*> values;
    if (left) variable_tokens(*left, names);
    if (right) variable_tokens(*right, values);
    for (const CNode* a : names) {
      for (const CNode* b : values) out.push_back({a->text, a->idx, "computedFrom", {b->text}, {b->idx}});
      states[a->text] = {a->idx};
    }
    sort_by_idx(out);
    return out;
  }
  if (n.type == "if_statement") {
    States current = states;
    bool has_else = false;
    for (const auto& k : n.kids) {
      if (k.type.find("else") != std::string::npos) has_else = true;
      auto part = dfg(k, current);
      out.insert(out.end(), part.begin(), part.end());
    }
    std::vector<const States*> branches{&current};
    if (!has_else) branches.push_back(&states);
    States merged;
    for (const States* s : branches) {
      for (const auto& [key, v] : *s) {
        auto& slot = merged[key];
        slot.insert(slot.end(), v.begin(), v.end());
      }
    }
    for (auto& [key, v] : merged) v = sorted_unique(std::move(v));
    states = std::move(merged);
    sort_by_idx(out);
    return out;
  }
  if (n.type == "for_statement" || n.type == "while_statement") {
    int passes = n.type == "while_statement" ? 2 : 1;
    for (int p = 0; p < passes; ++p) {
      for (const auto& k : n.kids) {
        auto part = dfg(k, states);
        out.insert(out.end(), part.begin(), part.end());
      }
    }
    return dedupe(out);
  }
  for (const auto& k : n.kids) {
    auto part = dfg(k, states);
    out.insert(out.end(), part.begin(), part.end());
  }
  sort_by_idx(out);
  return out;
}

std::vector<Flow> data_flow(CNode& root) {
  detail::number_tokens(root);
  States states;
  auto flows = dfg(root, states);
  sort_by_idx(flows);
  std::set<int> used;
  for (const auto& f : flows) {
    if (!f.idxs.empty()) used.insert(f.idx);
    used.insert(f.idxs.begin(), f.idxs.end());
  }
  std::vector<Flow> merged;
  std::unordered_map<int, std::size_t> at;
  for (const auto& f : flows) {
    if (!used.count(f.idx)) continue;
    auto it = at.find(f.idx);
    if (it == at.end()) {
      at[f.idx] = merged.size();
      merged.push_back(f);
    } else {
      Flow& m = merged[it->second];
      m.code = f.code;
      m.rel = f.rel;
      union_into(m.names, f.names);
      union_into(m.idxs, f.idxs);
    }
  }
  return merged;
}

using NormFlow = std::tuple<std::string, std::string, std::vector<std::string>>;

std::vector<NormFlow> normalize(const std::vector<Flow>& flows) {
  std::map<std::string, std::string> names;
  auto name_of = [&](const std::string& v) -> const std::string& {
    auto it = names.find(v);
    if (it == names.end()) it = names.emplace(v, "var_" + std::to_string(names.size())).first;
    return it->second;
  };
  std::vector<NormFlow> out;
  for (const auto& f : flows) {
    for (const auto& p : f.names) name_of(p);
    std::string var = name_of(f.code);
    std::vector<std::string> parents;
    for (const auto& p : f.names) parents.push_back(names[p]);
    out.emplace_back(var, f.rel, parents);
  }
  return out;
}

double dataflow_match(CNode& pred, CNode& gt) {
  auto ref = normalize(data_flow(gt));
  auto cand = normalize(data_flow(pred));
  // No reference edges: nothing to miss.
  if (ref.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& r : ref) {
    auto it = std::find(cand.begin(), cand.end(), r);
    if (it != cand.end()) {
      ++hit;
      cand.erase(it);
    }
  }
  return static_cast<double>(hit) / static_cast<double>(ref.size());
}

}  // namespace

const std::vector<std::string>& codebleu_keywords() {
  static const std::vector<std::string> kWords = {
      "auto", "else", "long", "switch", "break", "enum", "register", "typedef", "case",
      "extern", "return", "union", "char", "float", "short", "unsigned", "const", "for",
      "signed", "void", "continue", "goto", "sizeof", "volatile", "default", "if", "static",
      "while", "do", "int", "struct", "_Packed", "double",
      // decompiler type names
      "__int8", "__int16", "__int32", "__int64", "__int128", "_BYTE", "_WORD", "_DWORD",
      "_QWORD", "_OWORD", "_TBYTE", "_BOOL1", "_BOOL2", "_BOOL4", "_BOOL8", "_UNKNOWN",
  };
  return kWords;
}

CodeBleuScore codebleu_detail(std::string_view pred, std::string_view gt, const CodeBleuOptions& opts) {
  pred = trim(pred);
  gt = trim(gt);
  CodeBleuScore s;
  if (pred == gt && !gt.empty()) {
    s.ngram = s.weighted_ngram = s.syntax = s.dataflow = 1.0;
  } else {
    const auto& kw_list = opts.keywords.empty() ? codebleu_keywords() : opts.keywords;
    std::set<std::string, std::less<>> kw(kw_list.begin(), kw_list.end());
    auto hyp = split_ws(pred);
    auto ref = split_ws(gt);
    s.ngram = bleu(ref, hyp, nullptr);
    s.weighted_ngram = bleu(ref, hyp, &kw);
    CNode pt = detail::c_tree(pred);
    CNode gtree = detail::c_tree(gt);
    s.syntax = syntax_match(pt, gtree);
    s.dataflow = dataflow_match(pt, gtree);
  }
  const auto& w = opts.weights;
  s.score = w[0] * s.ngram + w[1] * s.weighted_ngram + w[2] * s.syntax + w[3] * s.dataflow;
  return s;
}

double codebleu(std::string_view pred, std::string_view gt) { return codebleu_detail(pred, gt).score; }

std::vector<std::string> syntax_subtrees(std::string_view code) {
  std::vector<std::string> out;
  collect_subtrees(detail::c_tree(trim(code)), out);
  return out;
}

std::vector<DataflowEdge> dataflow_edges(std::string_view code) {
  CNode root = detail::c_tree(trim(code));
  std::vector<DataflowEdge> out;
  for (const auto& f : data_flow(root)) out.push_back({f.code, f.rel, f.names});
  return out;
}

}  // namespace recon::bench
