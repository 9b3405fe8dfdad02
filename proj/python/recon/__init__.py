"""Python access to the recon core: context selection, data-flow tracing,
task runs, benchmark scoring, SFT synthesis and corpus hygiene."""

import json as _json
from pathlib import Path as _Path

from . import _recon
from ._recon import ReconError, codebleu, mix_plan, rouge_name

__all__ = [
    "Graph", "ReconError", "load_dump", "parse_answer", "bench_run", "synth_sft",
    "sanitize", "dedup", "render_sample", "mix_plan", "rouge_name", "codebleu",
]


class Graph:
    """Call graph over one decompiler dump (JSONL text)."""

    def __init__(self, dump_jsonl: str):
        self._g = _recon.Graph(dump_jsonl)

    def names(self):
        return self._g.names()

    def function_text(self, name):
        return self._g.function_text(name)

    def context(self, target, depth=1, k=10, beta=25.0):
        return _json.loads(self._g.context(target, depth, k, beta))

    def trace(self, target, var, depth=1):
        return _json.loads(self._g.trace(target, var, depth))

    def annotate(self, target, var, depth=1):
        return self._g.annotate(target, var, depth)

    def prompt(self, target, task, depth=1, k=10):
        return self._g.prompt(target, task, depth, k)

    def run(self, target, task, model_config="mock", depth=1, k=10):
        return _json.loads(self._g.run(target, task, str(model_config), depth, k))


def load_dump(path):
    return Graph(_Path(path).read_text())


def parse_answer(task, text):
    return _json.loads(_recon.parse_answer(task, text))


def bench_run(dataset, adapter="replay", tasks=(), model_config="mock", threads=4):
    return _json.loads(_recon.bench_run(str(dataset), adapter, list(tasks), str(model_config), threads))


def synth_sft(raw, mode, guide, out_dir, model_config="mock", workers=4, shards=8):
    return _json.loads(_recon.synth_sft(str(raw), mode, str(guide), str(out_dir), str(model_config), workers, shards))


def sanitize(records, min_lines=3, max_lines=500, drop_thunks=True, require_source=False):
    """records: list of dicts; returns {"kept": [...], "dropped": [{"key", "reason"}]}."""
    text = "".join(_json.dumps(r) + "\n" for r in records)
    return _json.loads(_recon.sanitize(text, min_lines, max_lines, drop_thunks, require_source))


def dedup(texts, addresses=None, **params):
    if addresses is None:
        addresses = list(range(len(texts)))
    return _json.loads(_recon.dedup(list(texts), list(addresses), **params))


def render_sample(record, seed):
    return _json.loads(_recon.render_sample(_json.dumps(record), seed))
