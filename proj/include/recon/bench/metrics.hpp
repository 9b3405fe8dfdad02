#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::bench {

struct RougeScore {
  double recall = 0;  // headline number
  double precision = 0;
  double f1 = 0;
};

/// ROUGE-1 over identifier word tokens (pseudoc::tokenize_identifier),
/// multiset overlap. A ground truth with no tokens scores 0.
RougeScore rouge(std::string_view pred, std::string_view gt);
double rouge_name(std::string_view pred, std::string_view gt);

struct StructMember {
  std::string name;
  long offset = 0;
  long size = 0;
};

struct StructLayout {
  std::string name;
  long total_size = 0;
  std::vector<StructMember> members;

  /// Throws Error(InvalidArgument) on overlapping or out-of-range members.
  void validate() const;
};

void to_json(nlohmann::json& j, const StructLayout& s);
void from_json(const nlohmann::json& j, StructLayout& s);

/// Interior member starts (offset > 0).
std::vector<long> struct_boundaries(const StructLayout& layout);

struct StructScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

StructScore struct_f1(const StructLayout& pred, const StructLayout& gt);

struct CodeBleuScore {
  double score = 0;
  double ngram = 0;           // BLEU-4
  double weighted_ngram = 0;  // keyword-weighted
  double syntax = 0;          // reference subtrees found in the prediction
  double dataflow = 0;        // normalized def-use edges found in the prediction
};

struct CodeBleuOptions {
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};
  /// Tokens weighted 1 in the weighted component; every other token 0.2.
  std::vector<std::string> keywords;  // empty = codebleu_keywords()
};

/// C keywords plus decompiler type names.
const std::vector<std::string>& codebleu_keywords();

CodeBleuScore codebleu_detail(std::string_view pred, std::string_view gt, const CodeBleuOptions& opts = {});
double codebleu(std::string_view pred, std::string_view gt);

/// Sub-tree s-expressions compared by the syntax component (tree-sitter-c
/// node vocabulary), root first.
std::vector<std::string> syntax_subtrees(std::string_view code);

struct DataflowEdge {
  std::string var;
  std::string relation;  // "comesFrom" or "computedFrom"
  std::vector<std::string> parents;
};

/// Def-use edges of `code` before name normalization.
std::vector<DataflowEdge> dataflow_edges(std::string_view code);

}  // namespace recon::bench
