"""Reference CodeBLEU values for the pairs in tests/fixtures/codebleu.

Runs the `codebleu` package (tree-sitter-c grammar) on every <name>_pred.c /
<name>_gt.c pair and writes reference.json next to them.

The package merges data-flow parent lists through Python sets, so its
data-flow component depends on PYTHONHASHSEED. "ordered" pins that merge to
first-occurrence order; "by_seed" keeps the raw scores for a few seeds.

    pip install codebleu tree-sitter-c
    python3 tests/oracles/codebleu_reference.py
"""

import json
import os
import subprocess
import sys
from pathlib import Path

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "codebleu"
SEEDS = range(8)


class OrderedSet(dict):
    def __init__(self, items=()):
        super().__init__((x, None) for x in items)

    def add(self, x):
        self[x] = None


def score(pred, gt, ordered):
    import codebleu.dataflow_match as dm
    import codebleu.parser.DFG as dfg
    from codebleu import calc_codebleu

    if ordered:
        dm.set = OrderedSet
        dfg.set = OrderedSet
    r = calc_codebleu([gt], [pred], "c")
    return {
        "codebleu": r["codebleu"],
        "ngram": r["ngram_match_score"],
        "weighted_ngram": r["weighted_ngram_match_score"],
        "syntax": r["syntax_match_score"],
        "dataflow": r["dataflow_match_score"],
    }


def pairs():
    for pred in sorted(FIXTURES.glob("*_pred.c")):
        name = pred.name[: -len("_pred.c")]
        yield name, pred.read_text(), (FIXTURES / f"{name}_gt.c").read_text()


def main():
    if len(sys.argv) > 1 and sys.argv[1] == "--one":
        # child process: raw package under the inherited hash seed
        out = {name: score(p, g, False)["codebleu"] for name, p, g in pairs()}
        print(json.dumps(out))
        return
    result = {}
    for name, p, g in pairs():
        result[name] = {"ordered": score(p, g, True), "by_seed": {}}
    for seed in SEEDS:
        env = dict(os.environ, PYTHONHASHSEED=str(seed))
        raw = subprocess.run([sys.executable, __file__, "--one"], env=env, check=True,
                             capture_output=True, text=True).stdout
        for name, v in json.loads(raw).items():
            result[name]["by_seed"][str(seed)] = v
    (FIXTURES / "reference.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    for name, r in result.items():
        seeds = r["by_seed"].values()
        print(f"{name}: {r['ordered']['codebleu']:.6f}  seeds {min(seeds):.6f}..{max(seeds):.6f}")


if __name__ == "__main__":
    main()
