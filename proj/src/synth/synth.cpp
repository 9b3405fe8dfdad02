#include "recon/synth/synth.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "recon/error.hpp"
#include "recon/llmgate/templates.hpp"
#include "recon/promptkit/prompt.hpp"
#include "recon/promptkit/response.hpp"
#include "recon/promptkit/schema.hpp"

namespace recon::synth {

namespace fs = std::filesystem;
using nlohmann::json;

void check_raw(const RawSftRecord& raw) {
  auto task = promptkit::TaskSpec::parse(raw.task);
  auto problems = promptkit::schema_violations(promptkit::schema(task.schema_id()), raw.answer);
  if (!problems.empty()) throw Error(ErrorCode::SchemaError, raw.key + ": answer: " + problems.front());
}

void to_json(json& j, const RawSftRecord& r) {
  j = {{"key", r.key},       {"task", r.task},
       {"prompt", r.prompt}, {"answer", r.answer},
       {"source_code", r.source_code}, {"meta", r.meta}};
}

void from_json(const json& j, RawSftRecord& r) {
  r.key = j.at("key").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.answer = j.at("answer");
  r.source_code = j.value("source_code", "");
  r.meta = j.value("meta", json::object());
}

RawSftRecord make_raw_record(const cgraph::CallGraph& graph, const std::string& target, const std::string& task,
                             json answer, std::string source_code, json meta) {
  auto spec = promptkit::TaskSpec::parse(task);
  RawSftRecord r;
  r.task = spec.tag();
  r.prompt = llmgate::prepare_prompt(graph, target, spec, {}).text();
  r.answer = std::move(answer);
  r.source_code = std::move(source_code);
  r.meta = meta.is_object() ? std::move(meta) : json::object();
  r.key = graph.dump().project_name + "/" + graph.dump().binary_name + "/" + target + "/" + r.task;
  check_raw(r);
  return r;
}

std::string_view to_string(CotMode m) { return m == CotMode::Super ? "Super" : "Standard"; }

std::string SftRecord::response() const {
  return promptkit::render_response(cot, answer,
                                    mode == CotMode::Super ? promptkit::kSuperThoughtTag : promptkit::kThoughtTag);
}

void to_json(json& j, const SftRecord& r) {
  j = {{"key", r.key},   {"task", r.task},      {"prompt", r.prompt},
       {"cot", r.cot},   {"answer", r.answer},  {"mode", std::string(to_string(r.mode))},
       {"response", r.response()}, {"provenance", json::array()}};
  for (const auto& a : r.provenance) {
    j["provenance"].push_back({{"response", a.response}, {"cot", a.cot}, {"outcome", a.outcome}});
  }
}

void to_json(json& j, const DpoPair& p) {
  j = {{"prompt", p.prompt}, {"chosen", p.chosen}, {"rejected", p.rejected}};
}

StepGuide StepGuide::parse(std::string_view toml_text) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("guide: ") + std::string(e.description()));
  }
  StepGuide g;
  g.task = doc["task"].value_or(std::string{});
  g.standard = doc["standard"].value_or(std::string{});
  if (auto* arr = doc["steps"].as_array()) {
    for (const auto& s : *arr) {
      auto v = s.value<std::string>();
      if (!v) throw Error(ErrorCode::FormatError, "guide: steps must be strings");
      g.steps.push_back(*v);
    }
  }
  if (g.task.empty()) throw Error(ErrorCode::FormatError, "guide: missing task");
  return g;
}

StepGuide StepGuide::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

}  // namespace

std::string extract_cot(std::string_view response) {
  auto open = response.find("<cot>");
  if (open == std::string_view::npos) throw Error(ErrorCode::GenFormatError, "generator output has no <cot>");
  auto close = response.find("</cot>", open + 5);
  if (close == std::string_view::npos) throw Error(ErrorCode::GenFormatError, "generator output has no </cot>");
  auto cot = trim(response.substr(open + 5, close - open - 5));
  if (cot.empty()) throw Error(ErrorCode::GenFormatError, "empty <cot> block");
  return cot;
}

namespace {

std::string complete_text(llmgate::LlmClient& client, const std::string& prompt) {
  return client.complete({{"user", prompt}}).content;
}

}  // namespace

Generation generate(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client) {
  auto prompt = llmgate::render_template(llmgate::prompt_template("generator.v1"),
                                         {{"prompt", raw.prompt},
                                          {"answer", raw.answer.dump(2)},
                                          {"source", raw.source_code.empty() ? "(none)" : raw.source_code},
                                          {"guide", guide.empty() ? "(none)" : std::string(guide)}});
  Generation g;
  g.response = complete_text(client, prompt);
  g.cot = extract_cot(g.response);
  return g;
}

std::string generate_cot(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client) {
  return generate(raw, guide, client).cot;
}

namespace {

bool yes_no(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::JudgeFormatError, std::string("verdict missing '") + key + "'");
  const auto& v = doc[key];
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "yes" || s == "true") return true;
    if (s == "no" || s == "false") return false;
  }
  throw Error(ErrorCode::JudgeFormatError, std::string("verdict '") + key + "' is not yes/no");
}

}  // namespace

Verdict parse_verdict(std::string_view text) {
  auto objects = promptkit::json_objects(text);
  if (objects.empty()) throw Error(ErrorCode::JudgeFormatError, "discriminator answer has no JSON object");
  auto [b, e] = objects.back();
  auto doc = json::parse(text.substr(b, e - b));
  Verdict v;
  v.correct = yes_no(doc, "correct");
  v.consistent = yes_no(doc, "consistent");
  v.helpful = yes_no(doc, "helpful");
  v.pure = yes_no(doc, "pure");
  v.accept = v.correct && v.consistent && v.helpful && v.pure;
  return v;
}

Verdict discriminate(const RawSftRecord& raw, std::string_view cot, llmgate::LlmClient& client) {
  if (trim(cot).empty()) throw Error(ErrorCode::InvalidArgument, "cot is empty");
  auto prompt = llmgate::render_template(llmgate::prompt_template("discriminator.v1"),
                                         {{"prompt", raw.prompt}, {"answer", raw.answer.dump(2)},
                                          {"cot", std::string(cot)}});
  std::vector<llmgate::Message> messages{{"user", prompt}};
  std::string last;
  for (int i = 0; i <= client.config().max_retries; ++i) {
    auto reply = client.complete_at(0.0, messages);
    try {
      return parse_verdict(reply.content);
    } catch (const Error& e) {
      last = e.what();
    } catch (const json::exception& e) {
      last = e.what();
    }
  }
  throw Error(ErrorCode::JudgeFormatError, "discriminator gave no usable verdict: " + last);
}

namespace {

void collect_identifiers(const json& v, std::set<std::string>& out) {
  if (v.is_object()) {
    for (const auto& [k, x] : v.items()) {
      if (x.is_string() && (k == "function_name" || k == "new_name" || k == "name")) {
        auto s = x.get<std::string>();
        if (s.size() >= kMinLeakIdentifier) out.insert(s);
      } else {
        collect_identifiers(x, out);
      }
    }
  } else if (v.is_array()) {
    for (const auto& x : v) collect_identifiers(x, out);
  }
}

std::string_view before_conclusion(std::string_view cot) {
  std::size_t pos = 0;
  while (pos <= cot.size()) {
    auto nl = cot.find('\n', pos);
    auto line = cot.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' || line[i] == '*')) ++i;
    std::string head;
    for (std::size_t k = i; k < line.size() && head.size() < 10; ++k) {
      head += static_cast<char>(std::tolower(static_cast<unsigned char>(line[k])));
    }
    if (head == "conclusion") return cot.substr(0, pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return cot;
}

}  // namespace

PurityReport purity_scan(std::string_view cot, const json& answer, std::string_view source) {
  PurityReport r;
  auto body = before_conclusion(cot);
  std::set<std::string> ids;
  collect_identifiers(answer, ids);
  for (const auto& id : ids) {
    if (body.find(id) != std::string_view::npos) r.leaks.push_back(id);
  }
  auto flat = collapse_ws(body);
  std::set<std::string> seen;
  std::size_t pos = 0;
  while (pos < source.size()) {
    auto nl = source.find('\n', pos);
    auto line = collapse_ws(source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (line.size() >= kMinLeakLine && seen.insert(line).second && flat.find(line) != std::string::npos) {
      r.leaks.push_back(line);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  r.pure = r.leaks.empty();
  return r;
}

bool purity_check(std::string_view cot, const json& answer, std::string_view source) {
  return purity_scan(cot, answer, source).pure;
}

namespace {

std::string verdict_text(const Verdict& v) {
  std::string out = "rejected:";
  if (!v.correct) out += " incorrect";
  if (!v.consistent) out += " inconsistent";
  if (!v.helpful) out += " unhelpful";
  if (!v.pure) out += " impure";
  return out;
}

}  // namespace

SftResult build_sft_record(const RawSftRecord& raw, std::string_view guide, llmgate::LlmClient& client,
                           int max_attempts) {
  if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be at least 1");
  std::vector<AttemptLog> log;
  for (int i = 0; i < max_attempts; ++i) {
    AttemptLog a;
    try {
      auto g = generate(raw, guide, client);
      a.response = g.response;
      a.cot = g.cot;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::GenFormatError) throw;
      a.outcome = std::string("GenFormatError: ") + e.what();
      log.push_back(std::move(a));
      continue;
    }
    if (auto p = purity_scan(a.cot, raw.answer, raw.source_code); !p.pure) {
      a.outcome = "impure: quotes '" + p.leaks.front() + "'";
      log.push_back(std::move(a));
      continue;
    }
    Verdict v;
    try {
      v = discriminate(raw, a.cot, client);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::JudgeFormatError) throw;
      a.outcome = std::string("JudgeFormatError: ") + e.what();
      log.push_back(std::move(a));
      continue;
    }
    if (!v.accept) {
      a.outcome = verdict_text(v);
      log.push_back(std::move(a));
      continue;
    }
    a.outcome = "accepted";
    log.push_back(std::move(a));

    SftResult out;
    out.record.key = raw.key;
    out.record.task = raw.task;
    out.record.prompt = raw.prompt;
    out.record.cot = log.back().cot;
    out.record.answer = raw.answer;
    out.record.mode = CotMode::Standard;
    out.record.provenance = log;
    auto chosen = out.record.response();
    for (std::size_t k = 0; k + 1 < log.size(); ++k) {
      const auto& bad = log[k];
      auto rejected = promptkit::render_response(bad.cot.empty() ? bad.response : bad.cot, raw.answer,
                                                 promptkit::kThoughtTag);
      if (rejected == chosen) continue;
      out.dpo.push_back({raw.prompt, chosen, rejected});
    }
    return out;
  }
  std::string why = log.empty() ? "" : log.back().outcome;
  throw Error(ErrorCode::ExhaustedAttempts,
              raw.key + ": no CoT accepted after " + std::to_string(max_attempts) + " attempts (" + why + ")");
}

SftRecord build_super_cot(const RawSftRecord& raw, const StepGuide& guide, llmgate::LlmClient& client) {
  if (guide.steps.empty()) throw Error(ErrorCode::InvalidArgument, "guide has no steps");
  const int n = static_cast<int>(guide.steps.size());
  std::string cot;
  std::vector<AttemptLog> log;
  for (int i = 0; i < n; ++i) {
    auto prompt = llmgate::render_template(llmgate::prompt_template("super_step.v1"),
                                           {{"prompt", raw.prompt},
                                            {"answer", raw.answer.dump(2)},
                                            {"source", raw.source_code.empty() ? "(none)" : raw.source_code},
                                            {"previous", cot.empty() ? "(none)" : cot},
                                            {"step", std::to_string(i + 1)},
                                            {"steps", std::to_string(n)},
                                            {"guide", guide.steps[i]}});
    AttemptLog a;
    a.response = complete_text(client, prompt);
    try {
      a.cot = extract_cot(a.response);
      if (!purity_check(a.cot, raw.answer, raw.source_code)) throw StepRejected(i + 1);
      if (!discriminate(raw, a.cot, client).accept) throw StepRejected(i + 1);
    } catch (const StepRejected&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::GenFormatError || e.code() == ErrorCode::JudgeFormatError) throw StepRejected(i + 1);
      throw;
    }
    a.outcome = "accepted";
    if (!cot.empty()) cot += "\n\n";
    cot += "### Step " + std::to_string(i + 1) + "\n" + a.cot;
    log.push_back(std::move(a));
  }
  SftRecord r;
  r.key = raw.key;
  r.task = raw.task;
  r.prompt = raw.prompt;
  r.cot = cot;
  r.answer = raw.answer;
  r.mode = CotMode::Super;
  r.provenance = std::move(log);
  // Steps can be clean one by one and still leak once joined (a line split
  // across steps); the whole record must pass too.
  if (!purity_check(r.cot, r.answer, raw.source_code)) throw StepRejected(n);
  return r;
}

json PipelineStats::to_json() const {
  return {{"total", total},         {"skipped", skipped},         {"accepted", accepted},
          {"rejected", rejected},   {"dpo_pairs", dpo_pairs},     {"accept_rate", accept_rate},
          {"mean_cot_tokens", mean_cot_tokens}};
}

int shard_of(std::string_view key, int shards) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(std::max(1, shards)));
}

namespace {

std::string shard_name(const char* kind, int shard) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05d.jsonl", kind, shard);
  return buf;
}

std::set<std::string> done_keys(const fs::path& dir, int shard) {
  std::set<std::string> out;
  for (const char* kind : {"log", "sft"}) {
    std::ifstream in(dir / shard_name(kind, shard));
    std::string line;
    while (std::getline(in, line)) {
      try {
        auto j = json::parse(line);
        out.insert(j.at("key").get<std::string>());
      } catch (const std::exception&) {
        // a torn last line from an interrupted run
      }
    }
  }
  return out;
}

struct WorkerTally {
  int skipped = 0, accepted = 0, rejected = 0, dpo = 0;
  double cot_tokens = 0;
};

}  // namespace

PipelineStats run_pipeline(const std::vector<RawSftRecord>& raws, const PipelineOptions& opts,
                           llmgate::LlmClient& client) {
  if (opts.mode == CotMode::Super && opts.guide.steps.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "Super mode needs a guide with at least 2 steps");
  }
  fs::create_directories(opts.out_dir);
  const int shards = std::max(1, opts.shards);
  const int workers = std::max(1, std::min(opts.workers, shards));
  std::vector<std::vector<const RawSftRecord*>> by_shard(shards);
  std::set<std::string> keys;
  for (const auto& r : raws) {
    if (!keys.insert(r.key).second) throw Error(ErrorCode::InvalidArgument, "duplicate raw record key " + r.key);
    by_shard[shard_of(r.key, shards)].push_back(&r);
  }

  auto work = [&](int w) {
    WorkerTally t;
    for (int s = w; s < shards; s += workers) {
      if (by_shard[s].empty()) continue;
      auto done = done_keys(opts.out_dir, s);
      std::ofstream sft(opts.out_dir / shard_name("sft", s), std::ios::app);
      std::ofstream dpo(opts.out_dir / shard_name("dpo", s), std::ios::app);
      std::ofstream log(opts.out_dir / shard_name("log", s), std::ios::app);
      for (const auto* raw : by_shard[s]) {
        if (done.count(raw->key)) {
          ++t.skipped;
          continue;
        }
        json entry = {{"key", raw->key}};
        try {
          check_raw(*raw);
          SftRecord rec;
          std::vector<DpoPair> pairs;
          if (opts.mode == CotMode::Super) {
            rec = build_super_cot(*raw, opts.guide, client);
          } else {
            auto res = build_sft_record(*raw, opts.guide.standard, client, opts.max_attempts);
            rec = std::move(res.record);
            pairs = std::move(res.dpo);
          }
          for (const auto& p : pairs) dpo << json(p).dump() << '\n';
          sft << json(rec).dump() << '\n';
          entry["status"] = "accepted";
          entry["attempts"] = rec.provenance.size();
          ++t.accepted;
          t.dpo += static_cast<int>(pairs.size());
          t.cot_tokens += static_cast<double>(rec.cot.size()) / 4.0;
        } catch (const Error& e) {
          entry["status"] = "rejected";
          entry["error"] = std::string(to_string(e.code())) + ": " + e.what();
          ++t.rejected;
        }
        log << entry.dump() << '\n';
        sft.flush();
        dpo.flush();
        log.flush();
      }
    }
    return t;
  };

  std::vector<std::future<WorkerTally>> jobs;
  for (int w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w));
  PipelineStats st;
  st.total = static_cast<int>(raws.size());
  double tokens = 0;
  for (auto& j : jobs) {
    auto t = j.get();
    st.skipped += t.skipped;
    st.accepted += t.accepted;
    st.rejected += t.rejected;
    st.dpo_pairs += t.dpo;
    tokens += t.cot_tokens;
  }
  int processed = st.accepted + st.rejected;
  st.accept_rate = processed > 0 ? static_cast<double>(st.accepted) / processed : 0.0;
  st.mean_cot_tokens = st.accepted > 0 ? tokens / st.accepted : 0.0;
  return st;
}

std::vector<RawSftRecord> load_raw(const fs::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + jsonl.string());
  std::vector<RawSftRecord> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<RawSftRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, jsonl.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace recon::synth
