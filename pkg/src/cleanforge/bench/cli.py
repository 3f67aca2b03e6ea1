"""``cleanforge`` command line.

Exit status: 0 ok, 1 usage or configuration error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

from ..errors import CleanforgeError, ConfigError, DataError, IoError, WordlistTooSmall
from ..operators import coarsen, collect_all
from ..relation import load_csv, write_csv
from ..repair_ir import apply_pipeline, check_pipeline, deserialize_pipeline, serialize_pipeline
from ..runtime import run_async, run_blocked, run_parallel
from ..search import SearchOutcome, search
from . import datasets
from .baselines import baseline_greedy, baseline_grid, baseline_random
from .config import Built, RunConfig, load_config
from .convergence import records, write_convergence
from .metrics import f1

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
BASELINES = ("grid", "greedy", "random")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cleanforge", description="Synthesize data-cleaning pipelines.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic benchmark and a sample run.toml")
    gsub = g.add_subparsers(dest="dataset", required=True, parser_class=_Parser)
    d = gsub.add_parser("dictionary")
    d.add_argument("--n", type=int, default=1000)
    d.add_argument("--frac", type=float, default=0.1)
    d.add_argument("--max-edits", type=int, default=3)
    c = gsub.add_parser("city")
    c.add_argument("--groups", type=int, default=200)
    c.add_argument("--err-frac", type=float, default=0.05)
    c.add_argument("--rows-per-group", type=int, default=5)
    t = gsub.add_parser("timeseries")
    t.add_argument("--n", type=int, default=1000)
    t.add_argument("--frac", type=float, default=0.02)
    t.add_argument("--magnitude", type=float, default=100.0)
    for sp in (d, c, t):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-o", "--out", default=".", help="output directory")

    cl = sub.add_parser("clean", help="run the configured search")
    cl.add_argument("-c", "--config", required=True)

    ap = sub.add_parser("apply", help="apply a saved pipeline to a CSV")
    ap.add_argument("-p", "--pipeline", required=True)
    ap.add_argument("-i", "--input", required=True)
    ap.add_argument("-o", "--output", required=True)

    b = sub.add_parser("bench", help="run the search and baselines, one log per method")
    b.add_argument("-c", "--config", required=True)
    b.add_argument("--baselines", default="grid,greedy,random")

    ins = sub.add_parser("inspect", help="print a saved pipeline")
    ins.add_argument("-p", "--pipeline", required=True)
    return p


# -- gen ---------------------------------------------------------------------------

_SAMPLES = {
    "dictionary": """\
[input]
path = "dirty.csv"
truth = "truth.csv"
dictionary = "dictionary.txt"

[[quality.terms]]
kind = "dictionary_violations"
attr = "word"

[[quality.terms]]
kind = "edit_cost"
baseline = "input"
weight = 0.1

[[operators]]
kind = "dictionary_spell"
attrs = ["word"]

[[operators]]
kind = "edit_dist_match"
attrs = ["word"]

[search]
gamma = 1.0
max_depth = 300
frontier_cap = 1
time_budget_s = 60.0

[mode]
kind = "async"

[output]
dir = "out"
""",
    "city": """\
[input]
path = "dirty.csv"
truth = "truth.csv"

[[quality.terms]]
kind = "fd_violations"
lhs = ["city_code"]
rhs = ["city_name"]

[[quality.terms]]
kind = "singleton_count"
group_attr = "city_name"

[[quality.terms]]
kind = "edit_cost"
baseline = "input"
weight = 0.1

[[operators]]
kind = "fd_chase"
lhs = ["city_code"]
rhs = "city_name"

[[operators]]
kind = "find_replace"
attrs = ["city_name"]

[[operators]]
kind = "edit_dist_match"
attrs = ["city_name"]

[search]
gamma = 1.0
max_depth = 3
frontier_cap = 4
time_budget_s = 60.0

[mode]
kind = "blocked"

[output]
dir = "out"
""",
    "timeseries": """\
[input]
path = "dirty.csv"
truth = "truth.csv"

[[quality.terms]]
kind = "ar_window_error"
value_attr = "value"
order_attr = "t"
window = 10

[[quality.terms]]
kind = "edit_cost"
baseline = "input"
weight = 0.0001

[[operators]]
kind = "gaussian_outlier"
value_attr = "value"
order_attr = "t"

[[operators]]
kind = "histogram_outlier"
value_attr = "value"
order_attr = "t"

[search]
gamma = 1.0
max_depth = 3
frontier_cap = 4
time_budget_s = 60.0

[mode]
kind = "batch"
coarsen = "coarse"

[output]
dir = "out"
""",
}


def _cmd_gen(a) -> int:
    if a.dataset == "dictionary":
        ds = datasets.gen_dictionary(a.n, a.frac, a.max_edits, a.seed)
    elif a.dataset == "city":
        ds = datasets.gen_city(a.groups, a.err_frac, a.seed, a.rows_per_group)
    else:
        ds = datasets.gen_timeseries(a.n, a.frac, a.magnitude, a.seed)
    paths = ds.save(a.out)
    cfg_path = Path(a.out) / "run.toml"
    cfg_path.write_text(_SAMPLES[a.dataset], encoding="utf-8")
    for k, p in sorted(paths.items()):
        print(f"{k}: {p}")
    print(f"config: {cfg_path}")
    return EXIT_OK


# -- clean / bench -----------------------------------------------------------------


def run_configured(b: Built) -> tuple[SearchOutcome, float]:
    """Run the configured mode; return the outcome and elapsed seconds."""
    cfg: RunConfig = b.cfg
    root, spec, ops = b.dirty, b.spec, b.operators
    t0 = time.perf_counter()
    if cfg.mode == "async":
        out = run_async(root, spec, ops, cfg.search, cfg.capacity, cfg.coarsen, cfg.delays,
                        cfg.sweep)
    elif cfg.mode == "blocked":
        out, _ = run_blocked(root, spec, ops, cfg.search, cfg.user_key, cfg.min_blocks,
                             coarsen_mode=cfg.coarsen)
    else:
        units = coarsen(collect_all(root, ops, cfg.sweep, cfg.search.seed), cfg.coarsen)
        if cfg.mode == "parallel":
            out = run_parallel(root, spec, units, cfg.search, cfg.workers)
        else:
            out = search(root, units, spec, cfg.search)
    return out, time.perf_counter() - t0


def _emit(b: Built, out: SearchOutcome, elapsed: float, log: Path, label: str) -> None:
    write_convergence(log, records(out.trace, b.dirty, b.truth, elapsed))
    line = (f"{label}: cost={out.best.cost!r} steps={len(out.best.pipeline)} "
            f"expanded={out.expanded_count} time={elapsed:.3f}s")
    if b.truth is not None:
        cleaned, _ = apply_pipeline(out.best.pipeline, b.dirty)
        line += f" f1={f1(b.dirty, cleaned, b.truth)[2]:.4f}"
    print(line)
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _cmd_clean(a) -> int:
    b = Built(load_config(a.config))
    out, elapsed = run_configured(b)
    b.cfg.out_dir.mkdir(parents=True, exist_ok=True)
    cleaned, _ = apply_pipeline(out.best.pipeline, b.dirty)
    write_csv(cleaned, str(b.cfg.cleaned_path))
    b.cfg.pipeline_path.write_text(serialize_pipeline(out.best.pipeline, indent=2) + "\n",
                                   encoding="utf-8")
    _emit(b, out, elapsed, b.cfg.convergence_path, b.cfg.mode)
    return EXIT_OK


def _cmd_bench(a) -> int:
    wanted = [s.strip() for s in a.baselines.split(",") if s.strip()]
    bad = [s for s in wanted if s not in BASELINES]
    if bad:
        raise UsageError(f"unknown baseline {bad[0]!r}; choose from {','.join(BASELINES)}")
    b = Built(load_config(a.config))
    b.cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(b.cfg.convergence_name).stem
    out, elapsed = run_configured(b)
    _emit(b, out, elapsed, b.cfg.out_dir / f"{stem}_cleanforge.csv", "cleanforge")
    for name in wanted:
        t0 = time.perf_counter()
        if name == "grid":
            res = baseline_grid(b.dirty, b.spec, b.operators, b.cfg.order, b.cfg.search)
        elif name == "greedy":
            res = baseline_greedy(b.dirty, b.spec, b.operators, b.cfg.search)
        else:
            res = baseline_random(b.dirty, b.spec, b.operators, b.cfg.order, b.cfg.search)
        _emit(b, res, time.perf_counter() - t0, b.cfg.out_dir / f"{stem}_{name}.csv", name)
    return EXIT_OK


# -- apply / inspect ---------------------------------------------------------------


def _read_pipeline(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read pipeline {path}: {e}") from e
    return deserialize_pipeline(text)


def _cmd_apply(a) -> int:
    p = _read_pipeline(a.pipeline)
    rel = load_csv(a.input)
    check_pipeline(p, rel.schema)
    out, deltas = apply_pipeline(p, rel)
    write_csv(out, a.output)
    print(f"applied {len(p)} steps, {len(deltas)} cells changed")
    return EXIT_OK


def _cmd_inspect(a) -> int:
    p = _read_pipeline(a.pipeline)
    print(f"{len(p)} steps")
    width = len(str(len(p)))
    for i, ca in enumerate(p.steps, 1):
        prov = ca.provenance
        params = ", ".join(repr(x) for x in prov.numeric_params)
        print(f"{i:>{width}}. {ca}    [{prov.operator} {prov.params_digest}"
              + (f" ({params})" if params else "") + "]")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "clean": _cmd_clean,
    "apply": _cmd_apply,
    "bench": _cmd_bench,
    "inspect": _cmd_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
        return _COMMANDS[args.cmd](args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, WordlistTooSmall, ValueError) as e:
        # ValueError covers generator preconditions and bad relation content
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except CleanforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # pragma: no cover - last resort
        print(f"internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
