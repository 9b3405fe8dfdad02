#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recon::corpus {

/// One function of the training corpus with whatever ground truth came with it.
struct CorpusRecord {
  std::string project;
  std::string binary;
  std::string name;
  std::uint64_t address = 0;
  std::string pseudocode;                         // stripped
  std::optional<std::string> pseudo_symbols;      // same function, debug symbols kept
  std::optional<std::string> source_code;
  std::optional<std::string> type_defs;
  std::optional<std::string> comment;

  std::string key() const;
};

void to_json(nlohmann::json& j, const CorpusRecord& r);
void from_json(const nlohmann::json& j, CorpusRecord& r);

std::vector<CorpusRecord> load_records(const std::filesystem::path& jsonl);
void save_records(const std::filesystem::path& jsonl, const std::vector<CorpusRecord>& records);

enum class DropReason { Thunk, Auxiliary, TooShort, TooLong, NoSource };

std::string_view to_string(DropReason r);

struct SanitizePolicy {
  int min_lines = 3;
  int max_lines = 500;
  bool drop_thunks = true;
  std::vector<std::string> auxiliary_names = default_auxiliary_names();
  bool require_source = false;

  static std::vector<std::string> default_auxiliary_names();
  /// Throws Error(InvalidArgument) unless min_lines < max_lines.
  void validate() const;
};

struct Dropped {
  CorpusRecord record;
  DropReason reason;
};

struct SanitizeResult {
  std::vector<CorpusRecord> kept;  // input order
  std::vector<Dropped> dropped;
};

/// Body is a single jump or tail call (JUMPOUT, goto, `return f(...)`,
/// `f(...)`, an asm jmp), or the decompiler marked it as a thunk.
bool is_thunk(std::string_view pseudocode);

/// Checks, first match wins: Auxiliary, Thunk, TooShort, TooLong, NoSource.
std::optional<DropReason> drop_reason(const CorpusRecord& r, const SanitizePolicy& policy);
SanitizeResult sanitize(const std::vector<CorpusRecord>& records, const SanitizePolicy& policy = {});

struct DedupParams {
  int shingle_size = 5;  // tokens
  int num_hashes = 128;
  double threshold = 0.85;
  int bands = 16;
  int rows = 8;
  std::uint64_t seed = 0x5eed;

  /// Throws Error(InvalidArgument) unless bands * rows == num_hashes.
  void validate() const;
};

/// Hashed token shingles of the pseudo code (comments dropped). Texts
/// shorter than one shingle give a single shingle of all tokens.
std::vector<std::uint64_t> shingles(std::string_view pseudocode, int shingle_size);

/// Exact Jaccard similarity of two shingle sets.
double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

using Signature = std::vector<std::uint64_t>;
Signature minhash(const std::vector<std::uint64_t>& shingle_set, const DedupParams& params);
double estimated_jaccard(const Signature& a, const Signature& b);

struct DedupResult {
  std::vector<std::size_t> kept;                         // indices, ascending
  std::vector<std::vector<std::size_t>> clusters;        // representative first; size >= 2
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // LSH candidates verified >= threshold
  std::size_t candidates = 0;
};

/// LSH over MinHash signatures; candidates with estimated Jaccard >=
/// threshold are duplicates. Records are visited by address (then index):
/// each one joins the cluster of the first earlier representative it
/// duplicates, otherwise it becomes a representative.
DedupResult minhash_dedup(const std::vector<std::string>& texts, const std::vector<std::uint64_t>& addresses,
                          const DedupParams& params = {});
DedupResult minhash_dedup(const std::vector<CorpusRecord>& records, const DedupParams& params = {});

/// Segment order of a pretraining sample.
enum class Segment { Stripped, Symbols, Comment };

struct PretrainSample {
  std::string stripped;  // stripped pseudo code
  std::string symbols;   // pseudo code with symbols, source and type definitions
  std::string comment;
  std::array<Segment, 3> order{Segment::Stripped, Segment::Symbols, Segment::Comment};
  std::string rendered;
};

std::string_view segment_header(Segment s);

/// One of the 6 orders, uniform in `seed`. Throws Error(MissingSegment) when
/// the record lacks stripped pseudo code, source or comment; symbolized
/// pseudo code and type definitions join the source segment when present.
/// Throws Error(InvalidArgument) if a segment contains a segment header.
PretrainSample render_pretrain_sample(const CorpusRecord& record, std::uint64_t seed);

/// Inverse of rendering: splits on the segment headers.
PretrainSample parse_pretrain_sample(std::string_view rendered);

/// Index into the 6 permutations drawn for `seed`.
int permutation_index(std::uint64_t seed);
const std::array<std::array<Segment, 3>, 6>& permutations();

struct DomainTokens {
  std::int64_t binary = 0;
  std::int64_t code = 0;
  std::int64_t text = 0;

  std::int64_t sum() const { return binary + code + text; }
  bool operator==(const DomainTokens&) const = default;
};

/// Quotas in the 60:25:15 ratio, capped by availability; a capped domain's
/// shortfall goes to the others in their ratio. Integer rounding by largest
/// remainder, so quotas sum to min(total, available.sum()).
DomainTokens mix_plan(const DomainTokens& available, std::int64_t total_tokens,
                      const std::array<double, 3>& ratio = {60, 25, 15});

}  // namespace recon::corpus
