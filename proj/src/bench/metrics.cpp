#include "recon/bench/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"
#include "recon/pseudoc/identifier.hpp"

namespace recon::bench {

RougeScore rouge(std::string_view pred, std::string_view gt) {
  auto p = pseudoc::tokenize_identifier(pred);
  auto g = pseudoc::tokenize_identifier(gt);
  RougeScore s;
  if (g.empty()) return s;
  std::map<std::string, int> left;
  for (const auto& t : p) ++left[t];
  int overlap = 0;
  for (const auto& t : g) {
    auto it = left.find(t);
    if (it != left.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  s.recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  s.precision = p.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(p.size());
  if (s.recall + s.precision > 0) s.f1 = 2 * s.recall * s.precision / (s.recall + s.precision);
  return s;
}

double rouge_name(std::string_view pred, std::string_view gt) { return rouge(pred, gt).recall; }

void StructLayout::validate() const {
  long prev_end = 0;
  long prev_offset = -1;
  for (const auto& m : members) {
    if (m.offset < 0 || m.size <= 0) {
      throw Error(ErrorCode::InvalidArgument, "struct " + name + ": member " + m.name + " has a bad offset or size");
    }
    if (m.offset <= prev_offset || m.offset < prev_end) {
      throw Error(ErrorCode::InvalidArgument, "struct " + name + ": member " + m.name + " overlaps its predecessor");
    }
    if (m.offset + m.size > total_size) {
      throw Error(ErrorCode::InvalidArgument, "struct " + name + ": member " + m.name + " runs past the end");
    }
    prev_offset = m.offset;
    prev_end = m.offset + m.size;
  }
}

void to_json(nlohmann::json& j, const StructLayout& s) {
  j = {{"name", s.name}, {"total_size", s.total_size}, {"members", nlohmann::json::array()}};
  for (const auto& m : s.members) {
    j["members"].push_back({{"name", m.name}, {"offset", m.offset}, {"size", m.size}});
  }
}

void from_json(const nlohmann::json& j, StructLayout& s) {
  s.name = j.value("name", "");
  s.total_size = j.at("total_size").get<long>();
  s.members.clear();
  for (const auto& m : j.value("members", nlohmann::json::array())) {
    s.members.push_back({m.value("name", ""), m.at("offset").get<long>(), m.at("size").get<long>()});
  }
}

std::vector<long> struct_boundaries(const StructLayout& layout) {
  std::set<long> b;
  for (const auto& m : layout.members) {
    if (m.offset > 0) b.insert(m.offset);
  }
  return {b.begin(), b.end()};
}

StructScore struct_f1(const StructLayout& pred, const StructLayout& gt) {
  auto p = struct_boundaries(pred);
  auto g = struct_boundaries(gt);
  StructScore s;
  if (p.empty() && g.empty()) {
    s.f1 = 1.0;
    return s;
  }
  std::vector<long> common;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
  double tp = static_cast<double>(common.size());
  double fp = static_cast<double>(p.size()) - tp;
  double fn = static_cast<double>(g.size()) - tp;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace recon::bench
