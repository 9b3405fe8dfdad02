// recon command line: context, tracing, task runs, benchmark, synthesis,
// corpus hygiene and the HTTP service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recon/bench/runner.hpp"
#include "recon/cgraph/context.hpp"
#include "recon/corpus/corpus.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/error.hpp"
#include "recon/llmgate/config.hpp"
#include "recon/llmgate/run.hpp"
#include "recon/pseudoc/dump.hpp"
#include "recon/server/service.hpp"
#include "recon/synth/synth.hpp"

using namespace recon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

llmgate::LlmConfig model_config(const std::string& path) {
  if (path.empty() || path == "mock") {
    llmgate::LlmConfig cfg;
    cfg.transport = "mock";
    return cfg;
  }
  return llmgate::load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

std::set<std::string> reached_by(const std::vector<dflow::TraceReport>& traces, const std::string& target) {
  std::set<std::string> out;
  for (const auto& t : traces)
    for (const auto& f : t.functions())
      if (f != target) out.insert(f);
  return out;
}

cgraph::ContextConfig ctx_config(int depth, int k, double beta) {
  cgraph::ContextConfig c;
  c.depth_callee = c.depth_caller = depth;
  c.k = k;
  c.beta = beta;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recon: context-enhanced decompilation assistant"};
  app.require_subcommand(1);

  // ctx
  std::string dump_path, target, var, task_tag, model_cfg;
  int depth = 1, k = 10;
  double beta = 25.0;
  bool as_json = false;
  auto* ctx = app.add_subcommand("ctx", "select context functions for a target");
  ctx->add_option("--dump", dump_path, "dump JSONL")->required();
  ctx->add_option("--target", target, "target function")->required();
  ctx->add_option("--depth", depth, "call-chain depth (both directions)")->capture_default_str();
  ctx->add_option("--k", k, "maximum context functions")->capture_default_str();
  ctx->add_option("--beta", beta, "line-count weight of the informative score")->capture_default_str();
  ctx->add_flag("--json", as_json, "emit the selection as JSON");

  // trace
  auto* trace = app.add_subcommand("trace", "trace a variable and annotate the functions it reaches");
  trace->add_option("--dump", dump_path)->required();
  trace->add_option("--target", target)->required();
  trace->add_option("--var", var, "variable of the target")->required();
  trace->add_option("--depth", depth)->capture_default_str();

  // run
  bool stream = false, show_prompt = false;
  auto* run = app.add_subcommand("run", "run one analysis task against a model");
  run->add_option("--dump", dump_path)->required();
  run->add_option("--target", target)->required();
  run->add_option("--task", task_tag, "task tag, e.g. \"<funcname>\"")->required();
  run->add_option("--model-config", model_cfg, "model TOML; \"mock\" or empty uses the local mock");
  run->add_option("--depth", depth)->capture_default_str();
  run->add_option("--k", k)->capture_default_str();
  run->add_flag("--stream", stream, "echo the answer to stderr as it arrives");
  run->add_flag("--prompt-only", show_prompt, "print the prompt and exit");

  // bench
  std::string dataset, adapter = "replay", out_path, judge_cfg;
  std::vector<std::string> tasks;
  int threads = 4;
  auto* bench_cmd = app.add_subcommand("bench", "benchmark");
  bench_cmd->require_subcommand(1);
  auto* bench_run = bench_cmd->add_subcommand("run", "score an adapter over a dataset");
  bench_run->add_option("--dataset", dataset, "dataset root")->required();
  bench_run->add_option("--adapter", adapter, "recopilot | replay")
      ->check(CLI::IsMember({"recopilot", "replay"}))
      ->capture_default_str();
  bench_run->add_option("--model-config", model_cfg, "model for the recopilot adapter");
  bench_run->add_option("--judge-config", judge_cfg, "model that judges summaries (unset: not scored)");
  bench_run->add_option("--tasks", tasks, "task tags (default: funcname vars args decompilation summary-en)");
  bench_run->add_option("--threads", threads)->capture_default_str();
  bench_run->add_option("--out", out_path, "report JSON (default stdout)");

  // synth
  std::string raw_path, mode = "standard", guide_path, out_dir;
  int workers = 4, shards = 8, attempts = 3;
  auto* synth_cmd = app.add_subcommand("synth", "training data synthesis");
  synth_cmd->require_subcommand(1);
  auto* sft = synth_cmd->add_subcommand("sft", "generate and filter reasoning for raw SFT records");
  sft->add_option("--raw", raw_path, "raw SFT JSONL")->required();
  sft->add_option("--mode", mode, "standard | super")->check(CLI::IsMember({"standard", "super"}))->capture_default_str();
  sft->add_option("--guide", guide_path, "step guide TOML")->required();
  sft->add_option("--out", out_dir, "output directory")->required();
  sft->add_option("--model-config", model_cfg, "generator/discriminator model");
  sft->add_option("--workers", workers)->capture_default_str();
  sft->add_option("--shards", shards)->capture_default_str();
  sft->add_option("--max-attempts", attempts)->capture_default_str();

  // corpus
  std::string in_path, dropped_path, clusters_path;
  corpus::SanitizePolicy policy;
  bool keep_thunks = false;
  corpus::DedupParams dedup;
  std::uint64_t seed = 0;
  std::int64_t avail_binary = 0, avail_code = 0, avail_text = 0, total = 0;
  auto* corpus_cmd = app.add_subcommand("corpus", "corpus hygiene and pretraining samples");
  corpus_cmd->require_subcommand(1);
  auto* sanitize = corpus_cmd->add_subcommand("sanitize", "drop thunks, auxiliary and out-of-range functions");
  sanitize->add_option("--in", in_path)->required();
  sanitize->add_option("--out", out_path)->required();
  sanitize->add_option("--dropped", dropped_path, "audit log of dropped records (JSONL)");
  sanitize->add_option("--min-lines", policy.min_lines)->capture_default_str();
  sanitize->add_option("--max-lines", policy.max_lines)->capture_default_str();
  sanitize->add_flag("--keep-thunks", keep_thunks);
  sanitize->add_flag("--require-source", policy.require_source);
  auto* dedup_cmd = corpus_cmd->add_subcommand("dedup", "MinHash near-duplicate removal");
  dedup_cmd->add_option("--in", in_path)->required();
  dedup_cmd->add_option("--out", out_path)->required();
  dedup_cmd->add_option("--clusters", clusters_path, "duplicate clusters (JSON)");
  dedup_cmd->add_option("--threshold", dedup.threshold)->capture_default_str();
  dedup_cmd->add_option("--shingle", dedup.shingle_size)->capture_default_str();
  dedup_cmd->add_option("--hashes", dedup.num_hashes)->capture_default_str();
  dedup_cmd->add_option("--bands", dedup.bands)->capture_default_str();
  dedup_cmd->add_option("--rows", dedup.rows)->capture_default_str();
  dedup_cmd->add_option("--seed", dedup.seed)->capture_default_str();
  auto* render = corpus_cmd->add_subcommand("render", "inner-shuffled pretraining samples");
  render->add_option("--in", in_path)->required();
  render->add_option("--out", out_path)->required();
  render->add_option("--seed", seed, "base seed; record i uses seed + i")->capture_default_str();
  render->add_option("--dropped", dropped_path, "records lacking a segment (JSONL)");
  auto* mix = corpus_cmd->add_subcommand("mix", "binary/code/text token quotas");
  mix->add_option("--binary", avail_binary, "available binary tokens")->required();
  mix->add_option("--code", avail_code, "available code tokens")->required();
  mix->add_option("--text", avail_text, "available text tokens")->required();
  mix->add_option("--total", total, "token budget")->required();

  // serve
  std::string data_dir = "recon-data", configs_dir = "configs", host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service");
  serve->add_option("--data-dir", data_dir)->capture_default_str();
  serve->add_option("--configs", configs_dir, "directory of <model>.toml files")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--workers", workers)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ctx) {
      cgraph::CallGraph g(pseudoc::load_dump(dump_path));
      if (!g.function(target)) throw Error(ErrorCode::UnknownFunction, target);
      auto cfg = ctx_config(depth, k, beta);
      auto traces = dflow::trace_all(g, target, cfg);
      auto sel = cgraph::select_context(cgraph::collect_context(g, target, cfg), cfg, reached_by(traces, target));
      if (as_json) {
        std::cout << cgraph::to_json(sel).dump(2) << "\n";
      } else {
        std::cout << "target " << target << "\n";
        for (const auto& c : sel.candidates)
          std::cout << "  " << c.name << "  depth " << c.depth << "  score " << c.score
                    << (c.dataflow_priority ? "  data-flow" : "") << "\n";
        std::cout << "selected:";
        for (const auto& s : sel.selected) std::cout << " " << s;
        std::cout << "\n";
      }
    } else if (*trace) {
      cgraph::CallGraph g(pseudoc::load_dump(dump_path));
      auto report = dflow::trace_variable(g, target, var, ctx_config(depth, 10, 25.0));
      std::vector<const pseudoc::PseudoFunction*> fns;
      for (const auto& name : report.visit_order)
        if (const auto* f = g.function(name)) fns.push_back(f);
      for (const auto& [name, text] : dflow::annotate(fns, report)) std::cout << "// ---- " << name << "\n" << text << "\n";
      std::cout << dflow::to_json(report).dump(2) << "\n";
    } else if (*run) {
      cgraph::CallGraph g(pseudoc::load_dump(dump_path));
      if (!g.function(target)) throw Error(ErrorCode::UnknownFunction, target);
      auto task = promptkit::TaskSpec::parse(task_tag);
      llmgate::RunOptions opts;
      opts.ctx = ctx_config(depth, k, 25.0);
      if (show_prompt) {
        std::cout << llmgate::prepare_prompt(g, target, task, opts).text();
        return 0;
      }
      llmgate::LlmClient client(model_config(model_cfg));
      llmgate::RunObserver obs;
      if (stream) obs.on_chunk = [](std::string_view c) { std::cerr << c << std::flush; };
      auto result = llmgate::run_task(g, target, task, client, opts, obs);
      if (stream) std::cerr << "\n";
      std::cout << llmgate::to_json(result).dump(2) << "\n";
      return result.status == llmgate::RunStatus::Applied ? 0 : 3;
    } else if (*bench_run) {
      bench::BenchConfig cfg;
      if (!tasks.empty()) cfg.tasks = tasks;
      cfg.threads = threads;
      std::unique_ptr<llmgate::LlmClient> judge;
      if (!judge_cfg.empty()) {
        judge = std::make_unique<llmgate::LlmClient>(model_config(judge_cfg));
        cfg.judge = bench::model_judge(*judge);
      }
      std::unique_ptr<llmgate::LlmClient> model;
      std::unique_ptr<bench::Adapter> a;
      if (adapter == "replay") {
        a = std::make_unique<bench::ReplayAdapter>();
      } else {
        model = std::make_unique<llmgate::LlmClient>(model_config(model_cfg));
        a = std::make_unique<bench::ModelAdapter>(*model);
      }
      auto report = bench::run_benchmark(fs::path(dataset), *a, cfg);
      write_text(out_path, report.to_json().dump(2) + "\n");
      if (!out_path.empty() && out_path != "-")
        std::cerr << "runs " << report.runs << "  applied " << report.applied << "  success "
                  << report.success_ratio << "\n";
    } else if (*sft) {
      synth::PipelineOptions opts;
      opts.mode = mode == "super" ? synth::CotMode::Super : synth::CotMode::Standard;
      opts.guide = synth::StepGuide::load(guide_path);
      opts.out_dir = out_dir;
      opts.workers = workers;
      opts.shards = shards;
      opts.max_attempts = attempts;
      llmgate::LlmClient client(model_config(model_cfg));
      auto stats = synth::run_pipeline(synth::load_raw(raw_path), opts, client);
      std::cout << stats.to_json().dump(2) << "\n";
    } else if (*sanitize) {
      policy.drop_thunks = !keep_thunks;
      auto res = corpus::sanitize(corpus::load_records(in_path), policy);
      corpus::save_records(out_path, res.kept);
      std::map<std::string, int> counts;
      std::string audit;
      for (const auto& d : res.dropped) {
        counts[std::string(corpus::to_string(d.reason))]++;
        audit += json{{"key", d.record.key()}, {"name", d.record.name}, {"reason", corpus::to_string(d.reason)}}.dump() +
                 "\n";
      }
      if (!dropped_path.empty()) write_text(dropped_path, audit);
      std::cout << json{{"kept", res.kept.size()}, {"dropped", res.dropped.size()}, {"reasons", counts}}.dump() << "\n";
    } else if (*dedup_cmd) {
      auto records = corpus::load_records(in_path);
      auto res = corpus::minhash_dedup(records, dedup);
      std::vector<corpus::CorpusRecord> kept;
      for (auto i : res.kept) kept.push_back(records[i]);
      corpus::save_records(out_path, kept);
      if (!clusters_path.empty()) {
        json clusters = json::array();
        for (const auto& c : res.clusters) {
          json keys = json::array();
          for (auto i : c) keys.push_back(records[i].key());
          clusters.push_back({{"kept", keys[0]}, {"members", keys}});
        }
        write_text(clusters_path, clusters.dump(2) + "\n");
      }
      std::cout << json{{"records", records.size()},
                        {"kept", kept.size()},
                        {"clusters", res.clusters.size()},
                        {"candidates", res.candidates},
                        {"verified_pairs", res.pairs.size()}}
                       .dump()
                << "\n";
    } else if (*render) {
      auto records = corpus::load_records(in_path);
      std::string out, missing;
      std::size_t n = 0;
      for (std::size_t i = 0; i < records.size(); ++i) {
        try {
          auto s = corpus::render_pretrain_sample(records[i], seed + i);
          out += json{{"key", records[i].key()}, {"order", corpus::permutation_index(seed + i)}, {"text", s.rendered}}
                     .dump() +
                 "\n";
          ++n;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MissingSegment && e.code() != ErrorCode::InvalidArgument) throw;
          missing += json{{"key", records[i].key()}, {"error", to_string(e.code())}, {"message", e.what()}}.dump() + "\n";
        }
      }
      write_text(out_path, out);
      if (!dropped_path.empty()) write_text(dropped_path, missing);
      std::cout << json{{"rendered", n}, {"skipped", records.size() - n}}.dump() << "\n";
    } else if (*mix) {
      auto q = corpus::mix_plan({avail_binary, avail_code, avail_text}, total);
      std::cout << json{{"binary", q.binary}, {"code", q.code}, {"text", q.text}, {"total", q.sum()}}.dump() << "\n";
    } else if (*serve) {
      server::ServiceOptions opts;
      opts.data_dir = data_dir;
      opts.configs_dir = configs_dir;
      opts.workers = workers;
      server::Service svc(opts);
      server::HttpServer http(svc);
      std::cerr << "serving on http://" << host << ":" << port << " (data in " << data_dir << ")\n";
      http.listen(host, port);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
