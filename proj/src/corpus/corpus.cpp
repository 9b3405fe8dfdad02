#include "recon/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "recon/error.hpp"
#include "recon/pseudoc/function.hpp"
#include "recon/pseudoc/lexer.hpp"

namespace recon::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string CorpusRecord::key() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(address));
  return project + "/" + binary + "/" + name + "@" + buf;
}

namespace {

void put_opt(json& j, const char* key, const std::optional<std::string>& v) {
  if (v) j[key] = *v;
}

std::optional<std::string> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

void to_json(json& j, const CorpusRecord& r) {
  j = {{"project", r.project}, {"binary", r.binary},         {"name", r.name},
       {"address", r.address}, {"pseudocode", r.pseudocode}};
  put_opt(j, "pseudo_symbols", r.pseudo_symbols);
  put_opt(j, "source_code", r.source_code);
  put_opt(j, "type_defs", r.type_defs);
  put_opt(j, "comment", r.comment);
}

void from_json(const json& j, CorpusRecord& r) {
  r.project = j.value("project", "");
  r.binary = j.value("binary", "");
  r.name = j.at("name").get<std::string>();
  r.address = j.value("address", std::uint64_t{0});
  r.pseudocode = j.at("pseudocode").get<std::string>();
  r.pseudo_symbols = get_opt(j, "pseudo_symbols");
  r.source_code = get_opt(j, "source_code");
  r.type_defs = get_opt(j, "type_defs");
  r.comment = get_opt(j, "comment");
}

std::vector<CorpusRecord> load_records(const fs::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + jsonl.string());
  std::vector<CorpusRecord> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<CorpusRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, jsonl.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void save_records(const fs::path& jsonl, const std::vector<CorpusRecord>& records) {
  std::ofstream out(jsonl, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + jsonl.string());
  for (const auto& r : records) out << json(r).dump() << '\n';
}

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::Thunk: return "Thunk";
    case DropReason::Auxiliary: return "Auxiliary";
    case DropReason::TooShort: return "TooShort";
    case DropReason::TooLong: return "TooLong";
    case DropReason::NoSource: return "NoSource";
  }
  return "?";
}

std::vector<std::string> SanitizePolicy::default_auxiliary_names() {
  // gcc/glibc startup and teardown glue
  return {"register_tm_clones", "deregister_tm_clones", "__do_global_dtors_aux",
          "__do_global_ctors_aux", "frame_dummy", "_start", "start", "_init", "_fini", "init_proc", "term_proc",
          "__libc_csu_init", "__libc_csu_fini", "__libc_start_main", "__gmon_start__", "__cxa_finalize",
          "_dl_relocate_static_pie", "__x86.get_pc_thunk.bx", "__stack_chk_fail"};
}

void SanitizePolicy::validate() const {
  if (min_lines >= max_lines)
    throw Error(ErrorCode::InvalidArgument, "min_lines must be below max_lines (" + std::to_string(min_lines) +
                                                " >= " + std::to_string(max_lines) + ")");
}

bool is_thunk(std::string_view pseudocode) {
  if (pseudocode.find("// attributes: thunk") != std::string_view::npos) return true;
  pseudoc::PseudoFunction fn;
  try {
    fn = pseudoc::parse_function({"", 0, std::string(pseudocode), false});
  } catch (const Error&) {
    return false;
  }
  const pseudoc::AstNode* body = nullptr;
  for (const auto& c : fn.ast.children)
    if (c.is(pseudoc::AstKind::Block)) body = &c;
  if (!body) return false;

  const pseudoc::AstNode* only = nullptr;
  for (const auto& s : body->children) {
    if (s.is(pseudoc::AstKind::Decl)) continue;
    if (only) return false;
    only = &s;
  }
  if (!only) return false;

  using pseudoc::AstKind;
  switch (only->kind) {
    case AstKind::Goto:
    case AstKind::Call:
      return true;
    case AstKind::Return:
      return only->children.size() == 1 && pseudoc::strip_casts(only->children[0]).is(AstKind::Call);
    case AstKind::Opaque: {
      auto text = pseudocode.substr(only->span.begin, only->span.end - only->span.begin);
      return text.find("__asm") != std::string_view::npos && text.find("jmp") != std::string_view::npos;
    }
    default:
      return false;
  }
}

std::optional<DropReason> drop_reason(const CorpusRecord& r, const SanitizePolicy& policy) {
  const auto& aux = policy.auxiliary_names;
  if (std::find(aux.begin(), aux.end(), r.name) != aux.end()) return DropReason::Auxiliary;
  if (policy.drop_thunks && is_thunk(r.pseudocode)) return DropReason::Thunk;
  int lines = pseudoc::count_lines(r.pseudocode);
  if (lines < policy.min_lines) return DropReason::TooShort;
  if (lines > policy.max_lines) return DropReason::TooLong;
  if (policy.require_source && (!r.source_code || r.source_code->empty())) return DropReason::NoSource;
  return std::nullopt;
}

SanitizeResult sanitize(const std::vector<CorpusRecord>& records, const SanitizePolicy& policy) {
  policy.validate();
  SanitizeResult out;
  for (const auto& r : records) {
    if (auto reason = drop_reason(r, policy))
      out.dropped.push_back({r, *reason});
    else
      out.kept.push_back(r);
  }
  return out;
}

// ---- MinHash ----

void DedupParams::validate() const {
  if (shingle_size < 1) throw Error(ErrorCode::InvalidArgument, "shingle_size must be positive");
  if (num_hashes < 1) throw Error(ErrorCode::InvalidArgument, "num_hashes must be positive");
  if (bands < 1 || rows < 1 || bands * rows != num_hashes)
    throw Error(ErrorCode::InvalidArgument, "bands * rows must equal num_hashes");
  if (threshold < 0 || threshold > 1) throw Error(ErrorCode::InvalidArgument, "threshold must be in [0, 1]");
}

namespace {

constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(p & kPrime);
  std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
  std::uint64_t r = lo + hi;
  return r >= kPrime ? r - kPrime : r;
}

struct HashFamily {
  std::vector<std::uint64_t> a, b;
};

HashFamily hash_family(const DedupParams& p) {
  std::mt19937_64 rng(p.seed);
  std::uniform_int_distribution<std::uint64_t> da(1, kPrime - 1), db(0, kPrime - 1);
  HashFamily f;
  for (int i = 0; i < p.num_hashes; ++i) {
    f.a.push_back(da(rng));
    f.b.push_back(db(rng));
  }
  return f;
}

Signature signature_with(const std::vector<std::uint64_t>& set, const HashFamily& f) {
  Signature sig(f.a.size(), kPrime);
  for (auto x : set) {
    std::uint64_t v = x % kPrime;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      std::uint64_t h = mulmod(f.a[i], v) + f.b[i];
      if (h >= kPrime) h -= kPrime;
      sig[i] = std::min(sig[i], h);
    }
  }
  return sig;
}

}  // namespace

std::vector<std::uint64_t> shingles(std::string_view pseudocode, int shingle_size) {
  if (shingle_size < 1) throw Error(ErrorCode::InvalidArgument, "shingle_size must be positive");
  std::vector<std::uint64_t> toks;
  for (const auto& t : pseudoc::lex(pseudocode)) {
    if (t.kind == pseudoc::TokenKind::Comment || t.kind == pseudoc::TokenKind::End) continue;
    toks.push_back(fnv1a(t.text));
  }
  std::vector<std::uint64_t> out;
  if (toks.empty()) return out;
  std::size_t k = static_cast<std::size_t>(shingle_size);
  std::size_t n = toks.size() < k ? 1 : toks.size() - k + 1;
  std::size_t w = std::min(k, toks.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::size_t j = 0; j < w; ++j) h = mix64(h ^ toks[i + j]);
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0, i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    if (sa[i] == sb[j]) {
      ++inter, ++i, ++j;
    } else if (sa[i] < sb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

Signature minhash(const std::vector<std::uint64_t>& shingle_set, const DedupParams& params) {
  params.validate();
  return signature_with(shingle_set, hash_family(params));
}

double estimated_jaccard(const Signature& a, const Signature& b) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorCode::InvalidArgument, "signature sizes differ");
  std::size_t eq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) eq += a[i] == b[i];
  return static_cast<double>(eq) / static_cast<double>(a.size());
}

DedupResult minhash_dedup(const std::vector<std::string>& texts, const std::vector<std::uint64_t>& addresses,
                          const DedupParams& params) {
  params.validate();
  if (texts.size() != addresses.size()) throw Error(ErrorCode::InvalidArgument, "texts and addresses differ in size");
  const std::size_t n = texts.size();
  const auto family = hash_family(params);

  std::vector<Signature> sigs(n);
  {
    unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8));
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < n; i += workers)
          sigs[i] = signature_with(shingles(texts[i], params.shingle_size), family);
      }));
    for (auto& j : jobs) j.get();
  }

  std::set<std::pair<std::size_t, std::size_t>> cand;
  for (int band = 0; band < params.bands; ++band) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t h = mix64(static_cast<std::uint64_t>(band));
      for (int r = 0; r < params.rows; ++r) h = mix64(h ^ sigs[i][band * params.rows + r]);
      buckets[h].push_back(i);
    }
    for (const auto& [_, members] : buckets)
      for (std::size_t x = 0; x < members.size(); ++x)
        for (std::size_t y = x + 1; y < members.size(); ++y) cand.emplace(members[x], members[y]);
  }

  DedupResult out;
  out.candidates = cand.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [i, j] : cand) {
    if (estimated_jaccard(sigs[i], sigs[j]) < params.threshold) continue;
    out.pairs.emplace_back(i, j);
    adj[i].push_back(j);
    adj[j].push_back(i);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return addresses[x] < addresses[y]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  // star clustering: members attach to a representative, never to another member
  std::vector<long> cluster_of(n, -1);
  std::vector<bool> is_rep(n, false);
  for (auto i : order) {
    std::size_t best = n;
    for (auto j : adj[i])
      if (is_rep[j] && rank[j] < rank[i] && (best == n || rank[j] < rank[best])) best = j;
    if (best == n) {
      is_rep[i] = true;
      out.kept.push_back(i);
      cluster_of[i] = static_cast<long>(out.clusters.size());
      out.clusters.push_back({i});
    } else {
      cluster_of[i] = cluster_of[best];
      out.clusters[cluster_of[best]].push_back(i);
    }
  }
  std::sort(out.kept.begin(), out.kept.end());
  std::erase_if(out.clusters, [](const auto& c) { return c.size() < 2; });
  return out;
}

DedupResult minhash_dedup(const std::vector<CorpusRecord>& records, const DedupParams& params) {
  std::vector<std::string> texts;
  std::vector<std::uint64_t> addrs;
  for (const auto& r : records) {
    texts.push_back(r.pseudocode);
    addrs.push_back(r.address);
  }
  return minhash_dedup(texts, addrs, params);
}

// ---- pretraining samples ----

std::string_view segment_header(Segment s) {
  switch (s) {
    case Segment::Stripped: return "<|pseudo_stripped|>\n";
    case Segment::Symbols: return "<|pseudo_symbols_source|>\n";
    case Segment::Comment: return "<|comment|>\n";
  }
  return "";
}

const std::array<std::array<Segment, 3>, 6>& permutations() {
  using S = Segment;
  static const std::array<std::array<Segment, 3>, 6> perms{{
      {S::Stripped, S::Symbols, S::Comment},
      {S::Stripped, S::Comment, S::Symbols},
      {S::Symbols, S::Stripped, S::Comment},
      {S::Symbols, S::Comment, S::Stripped},
      {S::Comment, S::Stripped, S::Symbols},
      {S::Comment, S::Symbols, S::Stripped},
  }};
  return perms;
}

int permutation_index(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return static_cast<int>(rng() % 6);
}

namespace {

std::string& segment_ref(PretrainSample& s, Segment seg) {
  switch (seg) {
    case Segment::Stripped: return s.stripped;
    case Segment::Symbols: return s.symbols;
    case Segment::Comment: return s.comment;
  }
  return s.comment;
}

}  // namespace

PretrainSample render_pretrain_sample(const CorpusRecord& record, std::uint64_t seed) {
  auto missing = [&](const char* what) {
    return Error(ErrorCode::MissingSegment, record.key() + ": no " + what);
  };
  if (record.pseudocode.empty()) throw missing("stripped pseudo code");
  if (!record.source_code || record.source_code->empty()) throw missing("source code");
  if (!record.comment || record.comment->empty()) throw missing("comment");

  PretrainSample s;
  s.stripped = record.pseudocode;
  if (record.pseudo_symbols && !record.pseudo_symbols->empty()) s.symbols = *record.pseudo_symbols + "\n\n";
  if (record.type_defs && !record.type_defs->empty()) s.symbols += *record.type_defs + "\n\n";
  s.symbols += *record.source_code;
  s.comment = *record.comment;

  for (auto seg : {Segment::Stripped, Segment::Symbols, Segment::Comment})
    for (auto other : {Segment::Stripped, Segment::Symbols, Segment::Comment})
      if (segment_ref(s, seg).find(segment_header(other)) != std::string::npos)
        throw Error(ErrorCode::InvalidArgument, record.key() + ": segment text contains a segment header");

  s.order = permutations()[permutation_index(seed)];
  for (auto seg : s.order) {
    s.rendered += segment_header(seg);
    s.rendered += segment_ref(s, seg);
    s.rendered += '\n';
  }
  return s;
}

PretrainSample parse_pretrain_sample(std::string_view rendered) {
  struct Hit {
    std::size_t pos;
    Segment seg;
  };
  std::vector<Hit> hits;
  for (auto seg : {Segment::Stripped, Segment::Symbols, Segment::Comment}) {
    auto h = segment_header(seg);
    auto pos = rendered.find(h);
    if (pos == std::string_view::npos)
      throw Error(ErrorCode::MissingSegment, "sample lacks header " + std::string(h.substr(0, h.size() - 1)));
    if (rendered.find(h, pos + 1) != std::string_view::npos)
      throw Error(ErrorCode::FormatError, "repeated header " + std::string(h.substr(0, h.size() - 1)));
    hits.push_back({pos, seg});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  if (hits.front().pos != 0) throw Error(ErrorCode::FormatError, "text before the first segment");

  PretrainSample s;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    std::size_t begin = hits[i].pos + segment_header(hits[i].seg).size();
    std::size_t end = i + 1 < hits.size() ? hits[i + 1].pos : rendered.size();
    if (end == begin || rendered[end - 1] != '\n') throw Error(ErrorCode::FormatError, "segment not terminated");
    segment_ref(s, hits[i].seg) = std::string(rendered.substr(begin, end - 1 - begin));
    s.order[i] = hits[i].seg;
  }
  s.rendered = std::string(rendered);
  return s;
}

// ---- mixture ----

DomainTokens mix_plan(const DomainTokens& available, std::int64_t total_tokens, const std::array<double, 3>& ratio) {
  std::array<std::int64_t, 3> avail{available.binary, available.code, available.text};
  for (auto a : avail)
    if (a < 0) throw Error(ErrorCode::InvalidArgument, "negative availability");
  if (total_tokens < 0) throw Error(ErrorCode::InvalidArgument, "negative total");
  for (auto r : ratio)
    if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "ratios must be positive");

  const std::int64_t target = std::min(total_tokens, avail[0] + avail[1] + avail[2]);
  std::array<double, 3> share{};
  std::array<bool, 3> capped{};
  double remaining = static_cast<double>(target);
  for (;;) {
    double wsum = 0;
    for (int i = 0; i < 3; ++i)
      if (!capped[i]) wsum += ratio[i];
    if (wsum == 0) break;
    bool changed = false;
    for (int i = 0; i < 3; ++i) {
      if (capped[i]) continue;
      share[i] = remaining * ratio[i] / wsum;
      if (share[i] > static_cast<double>(avail[i])) {
        capped[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
    remaining = static_cast<double>(target);
    for (int i = 0; i < 3; ++i)
      if (capped[i]) {
        share[i] = static_cast<double>(avail[i]);
        remaining -= share[i];
      }
  }

  std::array<std::int64_t, 3> q{};
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    q[i] = std::min(avail[i], static_cast<std::int64_t>(std::floor(share[i] + 1e-9)));
    assigned += q[i];
  }
  // largest remainder; ties go to the earlier domain
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return share[a] - static_cast<double>(q[a]) > share[b] - static_cast<double>(q[b]);
  });
  while (assigned < target) {
    bool progressed = false;
    for (int i : idx) {
      if (assigned == target) break;
      if (q[i] < avail[i]) {
        ++q[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return {q[0], q[1], q[2]};
}

}  // namespace recon::corpus
