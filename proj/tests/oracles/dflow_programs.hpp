#pragma once

// Random programs restricted to the statement forms the tracer models, used
// to compare the tracer with the brute-force oracle.

#include <random>
#include <string>
#include <vector>

#include "recon/pseudoc/dump.hpp"

namespace recon::oracle {

struct SyntheticProgram {
  pseudoc::DecompDump dump;
  std::string target;
  std::string variable;
  int depth_callee = 1;
  int depth_caller = 1;
};

inline SyntheticProgram make_program(unsigned seed) {
  std::mt19937 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  int nfun = 2 + pick(5);
  std::vector<int> nparams(nfun), nlocals(nfun);
  for (int i = 0; i < nfun; ++i) {
    nparams[i] = 1 + pick(3);
    nlocals[i] = 2 + pick(4);
  }
  SyntheticProgram prog;
  prog.dump.project_name = "synthetic";
  prog.dump.binary_name = "prog" + std::to_string(seed);
  for (int f = 0; f < nfun; ++f) {
    auto var = [&]() {
      int total = nparams[f] + nlocals[f];
      int k = pick(total);
      return k < nparams[f] ? "a" + std::to_string(k + 1) : "v" + std::to_string(k - nparams[f] + 1);
    };
    auto callee = [&]() {
      // Mostly later functions so chains form; sometimes earlier (callers).
      int g = pick(nfun);
      return g == f && pick(3) ? std::string("memcpy") : "f" + std::to_string(g);
    };
    auto arg = [&]() -> std::string {
      switch (pick(7)) {
        case 0: return "*" + var();
        case 1: return "&" + var();
        case 2: return var() + " + " + std::to_string(1 + pick(8));
        case 3: return std::to_string(pick(100));
        case 4: return var() + " - 1";
        default: return var();
      }
    };
    auto call = [&]() {
      std::string c = callee() + "(";
      int n = 1 + pick(3);
      for (int i = 0; i < n; ++i) c += (i ? ", " : "") + arg();
      return c + ")";
    };
    std::string code = "__int64 __fastcall f" + std::to_string(f) + "(";
    for (int p = 0; p < nparams[f]; ++p) {
      code += (p ? ", " : "") + std::string(pick(2) ? "__int64 a" : "char *a") + std::to_string(p + 1);
    }
    code += ")\n{\n";
    for (int l = 0; l < nlocals[f]; ++l) {
      static const char* kTypes[] = {"__int64 ", "char *", "struct node *", "_QWORD *"};
      code += "  " + std::string(kTypes[pick(4)]) + "v" + std::to_string(l + 1) + "; // rax\n";
    }
    code += "\n";
    int nstmt = 4 + pick(8);
    for (int s = 0; s < nstmt; ++s) {
      switch (pick(14)) {
        case 0: code += "  " + var() + " = " + var() + ";\n"; break;
        case 1: code += "  *" + var() + " = " + var() + ";\n"; break;
        case 2: code += "  " + var() + " = *" + var() + ";\n"; break;
        case 3: code += "  " + var() + " = &" + var() + ";\n"; break;
        case 4: code += "  " + var() + "[2] = " + var() + ";\n"; break;
        case 5: code += "  " + var() + " = " + var() + "->next;\n"; break;
        case 6: code += "  " + var() + " = " + var() + " + " + var() + ";\n"; break;
        case 7: code += "  " + call() + ";\n"; break;
        case 8: code += "  " + var() + " = " + call() + ";\n"; break;
        case 9: code += "  if ( " + var() + " > 3 )\n    " + var() + " = " + var() + ";\n"; break;
        case 10: code += "  while ( " + var() + " )\n    " + var() + " = (__int64)" + var() + ";\n"; break;
        case 11: code += "  " + var() + "->next = " + var() + ";\n"; break;
        case 12: code += "  " + var() + " = " + var() + "[" + var() + "];\n"; break;
        default: code += "  " + call() + ";\n"; break;
      }
    }
    code += "  return " + var() + ";\n}\n";
    pseudoc::FunctionRecord rec;
    rec.name = "f" + std::to_string(f);
    rec.address = 0x1000 + 0x100 * static_cast<std::uint64_t>(f);
    rec.pseudocode = code;
    prog.dump.functions.push_back(rec);
  }
  // Trace from a function in the middle so both directions matter.
  int t = pick(nfun);
  prog.target = "f" + std::to_string(t);
  int k = pick(nparams[t] + nlocals[t]);
  prog.variable = k < nparams[t] ? "a" + std::to_string(k + 1) : "v" + std::to_string(k - nparams[t] + 1);
  prog.depth_callee = 1 + pick(2);
  prog.depth_caller = 1 + pick(2);
  return prog;
}

}  // namespace recon::oracle
