#pragma once

// Independent ranking of context candidates: own BFS, own score arithmetic
// on raw text, own ordering. Used to check cgraph selection.

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "recon/pseudoc/dump.hpp"

namespace recon::oracle {

struct OracleFn {
  std::string name;
  int lines = 1;
  int strings = 0;
  std::set<std::string> callees;
};

inline bool oracle_named(const std::string& n) {
  static const std::regex placeholder(R"((sub|loc|j_sub|nullsub|unknown_libname)_[0-9A-Fa-f]+)");
  return !n.empty() && !std::regex_match(n, placeholder);
}

inline double oracle_score(const OracleFn& f, double beta) {
  double s = oracle_named(f.name) ? 1 : 0;
  s += std::min(1.0, beta * f.strings / std::max(1, f.lines));
  if (!f.callees.empty()) {
    int named = 0;
    for (const auto& c : f.callees) named += oracle_named(c);
    s += static_cast<double>(named) / static_cast<double>(f.callees.size());
  }
  return s;
}

struct OracleRanking {
  std::vector<std::string> ranked;
  std::vector<std::string> selected;
  std::map<std::string, std::pair<int, double>> candidates;  // depth, score
};

inline OracleRanking oracle_rank(const std::map<std::string, OracleFn>& fns, const std::string& target, int dcallee,
                                 int dcaller, int k, double beta, const std::set<std::string>& traced) {
  std::map<std::string, std::set<std::string>> callers;
  for (const auto& [n, f] : fns) {
    for (const auto& c : f.callees) callers[c].insert(n);
  }
  std::map<std::string, int> depth;
  auto walk = [&](bool forward, int limit) {
    std::map<std::string, int> seen{{target, 0}};
    std::vector<std::string> frontier{target};
    for (int d = 1; d <= limit; ++d) {
      std::vector<std::string> next;
      for (const auto& n : frontier) {
        if (n != target && !fns.count(n)) continue;  // externals end chains
        std::set<std::string> edges;
        if (forward) {
          if (fns.count(n)) edges = fns.at(n).callees;
        } else if (callers.count(n)) {
          edges = callers.at(n);
        }
        for (const auto& m : edges) {
          if (seen.count(m)) continue;
          seen[m] = d;
          next.push_back(m);
        }
      }
      frontier = next;
    }
    for (const auto& [n, d] : seen) {
      if (n == target || !fns.count(n)) continue;
      auto it = depth.find(n);
      if (it == depth.end() || d < it->second) depth[n] = d;
    }
  };
  walk(true, dcallee);
  walk(false, dcaller);
  struct Row {
    std::string name;
    int depth;
    double score;
    bool prio;
  };
  std::vector<Row> rows;
  OracleRanking out;
  for (const auto& [n, d] : depth) {
    double s = oracle_score(fns.at(n), beta);
    rows.push_back({n, d, s, traced.count(n) > 0});
    out.candidates[n] = {d, s};
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.prio != b.prio) return a.prio;
    if (a.score != b.score) return a.score > b.score;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.name < b.name;
  });
  if (static_cast<int>(rows.size()) > k) rows.resize(static_cast<std::size_t>(k));
  for (const auto& r : rows) out.ranked.push_back(r.name);
  // deepest first, rank order within a depth
  for (int d = std::max(dcallee, dcaller); d >= 1; --d) {
    for (const auto& r : rows) {
      if (r.depth == d) out.selected.push_back(r.name);
    }
  }
  return out;
}

struct RandomContextCase {
  pseudoc::DecompDump dump;
  std::map<std::string, OracleFn> fns;
  std::string target;
  int dcallee = 1, dcaller = 1, k = 10;
  std::set<std::string> traced;
};

inline RandomContextCase make_context_case(unsigned seed) {
  std::mt19937 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  RandomContextCase c;
  int n = 5 + pick(30);
  static const char* kNamed[] = {"parse_header", "crc32", "init", "free_ctx", "send_packet", "log_msg"};
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    names.push_back(pick(4) == 0 ? std::string(kNamed[pick(6)]) + "_" + std::to_string(i)
                                 : "sub_" + std::to_string(0x1000 + i * 16));
  }
  std::vector<std::string> externals = {"memcpy", "printf", "malloc"};
  for (int i = 0; i < n; ++i) {
    OracleFn f;
    f.name = names[static_cast<std::size_t>(i)];
    int ncalls = pick(5);
    std::string body;
    for (int j = 0; j < ncalls; ++j) {
      std::string callee = pick(5) == 0 ? externals[static_cast<std::size_t>(pick(3))]
                                        : names[static_cast<std::size_t>(pick(n))];
      if (callee == f.name) continue;
      f.callees.insert(callee);
      body += "  " + callee + "();\n";
    }
    f.strings = pick(3) == 0 ? pick(4) : 0;
    for (int s = 0; s < f.strings; ++s) body += "  v0 = \"s" + std::to_string(s) + "\";\n";
    int filler = pick(60);
    for (int j = 0; j < filler; ++j) body += "  v0 += 1;\n";
    std::string code = "int " + f.name + "()\n{\n" + body + "}";
    f.lines = 3 + static_cast<int>(std::count(body.begin(), body.end(), '\n'));
    c.dump.functions.push_back({f.name, 0x1000 + static_cast<std::uint64_t>(i) * 16, code, false});
    c.fns[f.name] = f;
  }
  c.target = names[static_cast<std::size_t>(pick(n))];
  c.dcallee = pick(4);
  c.dcaller = pick(4);
  c.k = pick(3) == 0 ? pick(12) : 10;
  for (const auto& nm : names) {
    if (pick(6) == 0) c.traced.insert(nm);
  }
  return c;
}

}  // namespace recon::oracle
