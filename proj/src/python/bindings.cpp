// _recon: JSON-shaped access to the core. Results cross the boundary as JSON
// text; the Python package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "recon/bench/metrics.hpp"
#include "recon/bench/runner.hpp"
#include "recon/cgraph/context.hpp"
#include "recon/corpus/corpus.hpp"
#include "recon/dflow/trace.hpp"
#include "recon/error.hpp"
#include "recon/llmgate/config.hpp"
#include "recon/llmgate/run.hpp"
#include "recon/promptkit/response.hpp"
#include "recon/pseudoc/dump.hpp"
#include "recon/synth/synth.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace recon;

namespace {

llmgate::LlmConfig model_config(const std::string& path) {
  if (path.empty() || path == "mock") {
    llmgate::LlmConfig cfg;
    cfg.transport = "mock";
    return cfg;
  }
  return llmgate::load_config(path);
}

cgraph::ContextConfig ctx_config(int depth, int k, double beta) {
  cgraph::ContextConfig c;
  c.depth_callee = c.depth_caller = depth;
  c.k = k;
  c.beta = beta;
  return c;
}

std::vector<corpus::CorpusRecord> records_from(const std::string& jsonl) {
  std::vector<corpus::CorpusRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(json::parse(line).get<corpus::CorpusRecord>());
  return out;
}

class Graph {
 public:
  explicit Graph(const std::string& jsonl) : g_(pseudoc::parse_dump_text(jsonl)) {}

  std::vector<std::string> names() const { return g_.names(); }

  std::string function_text(const std::string& name) const { return fn(name).source(); }

  std::string context(const std::string& target, int depth, int k, double beta) const {
    fn(target);
    auto cfg = ctx_config(depth, k, beta);
    std::set<std::string> reached;
    for (const auto& t : dflow::trace_all(g_, target, cfg))
      for (const auto& f : t.functions())
        if (f != target) reached.insert(f);
    return cgraph::to_json(cgraph::select_context(cgraph::collect_context(g_, target, cfg), cfg, reached)).dump();
  }

  std::string trace(const std::string& target, const std::string& var, int depth) const {
    return dflow::to_json(dflow::trace_variable(g_, target, var, ctx_config(depth, 10, 25.0))).dump();
  }

  std::map<std::string, std::string> annotate(const std::string& target, const std::string& var, int depth) const {
    auto report = dflow::trace_variable(g_, target, var, ctx_config(depth, 10, 25.0));
    std::vector<const pseudoc::PseudoFunction*> fns;
    for (const auto& n : report.visit_order)
      if (const auto* f = g_.function(n)) fns.push_back(f);
    return dflow::annotate(fns, report);
  }

  std::string prompt(const std::string& target, const std::string& task, int depth, int k) const {
    fn(target);
    llmgate::RunOptions opts;
    opts.ctx = ctx_config(depth, k, 25.0);
    return llmgate::prepare_prompt(g_, target, promptkit::TaskSpec::parse(task), opts).text();
  }

  std::string run(const std::string& target, const std::string& task, const std::string& model_config_path, int depth,
                  int k) const {
    fn(target);
    auto spec = promptkit::TaskSpec::parse(task);
    llmgate::RunOptions opts;
    opts.ctx = ctx_config(depth, k, 25.0);
    llmgate::LlmClient client(model_config(model_config_path));
    py::gil_scoped_release release;
    return llmgate::to_json(llmgate::run_task(g_, target, spec, client, opts)).dump();
  }

 private:
  const pseudoc::PseudoFunction& fn(const std::string& name) const {
    const auto* f = g_.function(name);
    if (!f) throw Error(ErrorCode::UnknownFunction, name);
    return *f;
  }

  cgraph::CallGraph g_;
};

std::string parse_answer(const std::string& task, const std::string& text) {
  auto p = promptkit::parse_response(promptkit::TaskSpec::parse(task), text);
  return json{{"task", p.task.tag()}, {"reasoning", p.reasoning}, {"payload", p.payload}}.dump();
}

std::string bench_run(const std::string& dataset, const std::string& adapter, const std::vector<std::string>& tasks,
                      const std::string& model_config_path, int threads) {
  bench::BenchConfig cfg;
  if (!tasks.empty()) cfg.tasks = tasks;
  cfg.threads = threads;
  py::gil_scoped_release release;
  if (adapter == "replay") {
    bench::ReplayAdapter a;
    return bench::run_benchmark(std::filesystem::path(dataset), a, cfg).to_json().dump();
  }
  if (adapter != "recopilot") throw Error(ErrorCode::InvalidArgument, "adapter must be replay or recopilot");
  llmgate::LlmClient client(model_config(model_config_path));
  bench::ModelAdapter a(client);
  return bench::run_benchmark(std::filesystem::path(dataset), a, cfg).to_json().dump();
}

std::string synth_sft(const std::string& raw, const std::string& mode, const std::string& guide,
                      const std::string& out_dir, const std::string& model_config_path, int workers, int shards) {
  synth::PipelineOptions opts;
  if (mode != "standard" && mode != "super") throw Error(ErrorCode::InvalidArgument, "mode must be standard or super");
  opts.mode = mode == "super" ? synth::CotMode::Super : synth::CotMode::Standard;
  opts.guide = synth::StepGuide::load(guide);
  opts.out_dir = out_dir;
  opts.workers = workers;
  opts.shards = shards;
  auto raws = synth::load_raw(raw);
  llmgate::LlmClient client(model_config(model_config_path));
  py::gil_scoped_release release;
  return synth::run_pipeline(raws, opts, client).to_json().dump();
}

std::string sanitize(const std::string& jsonl, int min_lines, int max_lines, bool drop_thunks, bool require_source) {
  corpus::SanitizePolicy policy;
  policy.min_lines = min_lines;
  policy.max_lines = max_lines;
  policy.drop_thunks = drop_thunks;
  policy.require_source = require_source;
  auto res = corpus::sanitize(records_from(jsonl), policy);
  json dropped = json::array();
  for (const auto& d : res.dropped)
    dropped.push_back({{"key", d.record.key()}, {"reason", corpus::to_string(d.reason)}});
  return json{{"kept", res.kept}, {"dropped", dropped}}.dump();
}

std::string dedup(const std::vector<std::string>& texts, const std::vector<std::uint64_t>& addresses, double threshold,
                  int shingle, int hashes, int bands, int rows, std::uint64_t seed) {
  corpus::DedupParams p;
  p.threshold = threshold;
  p.shingle_size = shingle;
  p.num_hashes = hashes;
  p.bands = bands;
  p.rows = rows;
  p.seed = seed;
  py::gil_scoped_release release;
  auto res = corpus::minhash_dedup(texts, addresses, p);
  return json{{"kept", res.kept}, {"clusters", res.clusters}, {"candidates", res.candidates}}.dump();
}

std::string render_sample(const std::string& record_json, std::uint64_t seed) {
  auto s = corpus::render_pretrain_sample(json::parse(record_json).get<corpus::CorpusRecord>(), seed);
  return json{{"order", corpus::permutation_index(seed)}, {"text", s.rendered}}.dump();
}

std::tuple<std::int64_t, std::int64_t, std::int64_t> mix(std::int64_t binary, std::int64_t code, std::int64_t text,
                                                        std::int64_t total) {
  auto q = corpus::mix_plan({binary, code, text}, total);
  return {q.binary, q.code, q.text};
}

}  // namespace

PYBIND11_MODULE(_recon, m) {
  m.doc() = "recon core bindings";

  static py::exception<Error> recon_error(m, "ReconError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = recon_error;
      PyErr_SetObject(err.ptr(), py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
    }
  });

  py::class_<Graph>(m, "Graph")
      .def(py::init<const std::string&>(), py::arg("dump_jsonl"))
      .def("names", &Graph::names)
      .def("function_text", &Graph::function_text, py::arg("name"))
      .def("context", &Graph::context, py::arg("target"), py::arg("depth") = 1, py::arg("k") = 10,
           py::arg("beta") = 25.0)
      .def("trace", &Graph::trace, py::arg("target"), py::arg("var"), py::arg("depth") = 1)
      .def("annotate", &Graph::annotate, py::arg("target"), py::arg("var"), py::arg("depth") = 1)
      .def("prompt", &Graph::prompt, py::arg("target"), py::arg("task"), py::arg("depth") = 1, py::arg("k") = 10)
      .def("run", &Graph::run, py::arg("target"), py::arg("task"), py::arg("model_config") = "mock",
           py::arg("depth") = 1, py::arg("k") = 10);

  m.def("parse_answer", &parse_answer, py::arg("task"), py::arg("text"));
  m.def("bench_run", &bench_run, py::arg("dataset"), py::arg("adapter") = "replay",
        py::arg("tasks") = std::vector<std::string>{}, py::arg("model_config") = "mock", py::arg("threads") = 4);
  m.def("synth_sft", &synth_sft, py::arg("raw"), py::arg("mode"), py::arg("guide"), py::arg("out_dir"),
        py::arg("model_config") = "mock", py::arg("workers") = 4, py::arg("shards") = 8);
  m.def("sanitize", &sanitize, py::arg("jsonl"), py::arg("min_lines") = 3, py::arg("max_lines") = 500,
        py::arg("drop_thunks") = true, py::arg("require_source") = false);
  m.def("dedup", &dedup, py::arg("texts"), py::arg("addresses"), py::arg("threshold") = 0.85,
        py::arg("shingle") = 5, py::arg("hashes") = 128, py::arg("bands") = 16, py::arg("rows") = 8,
        py::arg("seed") = 0x5eed);
  m.def("render_sample", &render_sample, py::arg("record_json"), py::arg("seed"));
  m.def("mix_plan", &mix, py::arg("binary"), py::arg("code"), py::arg("text"), py::arg("total"));
  m.def("rouge_name", [](const std::string& a, const std::string& b) { return bench::rouge_name(a, b); });
  m.def("codebleu", [](const std::string& a, const std::string& b) { return bench::codebleu(a, b); });
}
