import csv
import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleanforge.bench.baselines import baseline_greedy, baseline_grid, baseline_random
from cleanforge.bench.cli import main
from cleanforge.bench.config import Built, load_config
from cleanforge.bench.convergence import read_convergence, records
from cleanforge.bench.datasets import gen_city, gen_dictionary, gen_timeseries
from cleanforge.bench.metrics import SuboptimalityWarning, f1, suboptimality
from cleanforge.errors import ConfigError, WordlistTooSmall
from cleanforge.operators import Choice, FindReplace, Operator, find_replace_candidates
from cleanforge.quality import FdViolations, QualitySpec, SingletonCount, evaluate
from cleanforge.relation import Kind, Relation, diff, load_csv, write_csv
from cleanforge.repair_ir import NOOP, Pipeline, apply_pipeline, serialize_pipeline
from cleanforge.search import SearchConfig, TracePoint

from conftest import city_table, fr


# -- generators ----------------------------------------------------------------------


def test_gen_dictionary_shape():
    ds = gen_dictionary(1000, 0.1, 3, seed=1)
    assert len(ds.dirty) == 1100 and len(diff(ds.dirty, ds.truth)) == 100
    assert len(ds.words) == 1000 == len(set(ds.words))
    vocab = set(ds.words)
    assert all(d.new in vocab and d.old not in vocab for d in diff(ds.dirty, ds.truth))


def test_gen_dictionary_no_corruption_when_tiny():
    ds = gen_dictionary(5, 0.1, 2, seed=3)
    assert len(ds.dirty) == 5 and not diff(ds.dirty, ds.truth)


def test_gen_dictionary_errors():
    with pytest.raises(ValueError):
        gen_dictionary(10, 0.0, 1)
    with pytest.raises(ValueError):
        gen_dictionary(10, 0.1, 0)
    with pytest.raises(WordlistTooSmall):
        gen_dictionary(5, 0.5, 1, wordlist=["a", "b"])


@pytest.mark.parametrize("make", [
    lambda: gen_dictionary(200, 0.2, 3, seed=4),
    lambda: gen_city(20, 0.05, seed=4),
    lambda: gen_timeseries(200, 0.05, 50, seed=4),
])
def test_generators_byte_identical(make, tmp_path):
    a, b = make().save(tmp_path / "a"), make().save(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_gen_city_error_count():
    ds = gen_city(10, 0.05, seed=0)
    assert len(ds.dirty) == 50
    assert len(diff(ds.dirty, ds.truth)) == round(0.05 * 100)
    assert evaluate(QualitySpec([FdViolations(["city_code"], ["city_name"])]), ds.truth).total_cost == 0


def test_gen_timeseries_spikes():
    ds = gen_timeseries(1000, 0.02, 100, seed=0)
    d = diff(ds.dirty, ds.truth)
    assert len(d) == 20
    assert all(abs(abs(x.new - x.old) - 100) < 1e-6 for x in d)


# -- metrics ---------------------------------------------------------------------------


def _col(*vals):
    return Relation.from_rows([("v", Kind.TEXT)], [(v,) for v in vals])


def test_f1_examples():
    dirty, truth = _col("x", "y", "z"), _col("a", "b", "z")
    assert f1(dirty, truth, truth) == (1.0, 1.0, 1.0)
    assert f1(dirty, _col("a", "q", "z"), truth) == (0.5, 0.5, 0.5)
    assert f1(truth, truth, truth) == (1.0, 1.0, 1.0)
    assert f1(dirty, dirty, truth) == (1.0, 0.0, 0.0)
    assert f1(dirty, _col("q", "q", "z"), truth) == (0.0, 0.0, 0.0)


def test_suboptimality_examples():
    spec = QualitySpec([SingletonCount("v")])
    one = _col("a", "a", "b")
    assert suboptimality(spec, one, 1.0) == 1.0
    assert suboptimality(spec, one, 5.0) == pytest.approx(0.2)
    assert suboptimality(spec, _col("a", "a"), 0.0) == 1.0
    with pytest.warns(SuboptimalityWarning):
        assert suboptimality(spec, _col("a", "b", "c", "d"), 2.0) == 2.0
    with pytest.warns(SuboptimalityWarning):
        assert math.isnan(suboptimality(spec, one, 0.0))
    with pytest.raises(ValueError):
        suboptimality(spec, one, -1.0)


vals = st.sampled_from(["a", "b", "c"])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(vals, vals, vals), min_size=1, max_size=10))
def test_f1_bounds(rows):
    d, c, t = (_col(*[r[i] for r in rows]) for i in range(3))
    p, r, f = f1(d, c, t)
    assert 0 <= p <= 1 and 0 <= r <= 1 and 0 <= f <= 1
    assert f1(d, t, t) == (1.0, 1.0, 1.0)


# -- baselines -------------------------------------------------------------------------


class _Fixed(Operator):
    """Find-replace on one attribute, keeping the first ``k`` candidates for k in 0..n-1."""

    kind = "fixed"

    def __init__(self, attr, n, operator_id):
        super().__init__(operator_id, {"k": Choice(tuple(float(i) for i in range(n)))})
        self.attr = attr

    def propose(self, rel, params):
        return find_replace_candidates(rel, self.attr)[: int(params["k"])]


class _Empty(Operator):
    kind = "empty"

    def settings(self, sweep="restrictive", seed=0):
        return iter(())


def test_grid_counts_joint_settings():
    rel = city_table()
    ops = [_Fixed("city_name", 2, "a"), _Fixed("city_code", 3, "b")]
    out = baseline_grid(rel, QualitySpec([SingletonCount("city_name")]), ops, ["a", "b"],
                        SearchConfig())
    assert out.expanded_count == 6


def test_grid_single_setting_applies_wholesale():
    rel = city_table()
    op = FindReplace(["city_name"])
    spec = QualitySpec([SingletonCount("city_name")])
    out = baseline_grid(rel, spec, [op], None, SearchConfig())
    (s,) = list(op.settings())
    whole, _ = apply_pipeline(op.collect(rel, s), rel)
    assert out.expanded_count == 1
    assert out.best.cost == min(evaluate(spec, rel).total_cost, evaluate(spec, whole).total_cost)


def test_grid_requires_full_order():
    with pytest.raises(ValueError):
        baseline_grid(city_table(), QualitySpec([SingletonCount("city_name")]),
                      [FindReplace(["city_name"])], [], SearchConfig())
    with pytest.raises(ValueError):
        baseline_grid(city_table(), QualitySpec([SingletonCount("city_name")]),
                      [FindReplace(["city_name"])], ["find_replace", "other"], SearchConfig())


def test_greedy_single_operator_equals_grid():
    rel = city_table()
    spec = QualitySpec([FdViolations(["city_code"], ["city_name"]), SingletonCount("city_name")])
    op = _Fixed("city_name", 4, "a")
    assert baseline_greedy(rel, spec, [op], SearchConfig()).best.cost == \
        baseline_grid(rel, spec, [op], None, SearchConfig()).best.cost


def test_empty_grids_give_noop():
    rel = city_table()
    spec = QualitySpec([SingletonCount("city_name")])
    op = _Empty()
    for out in (baseline_greedy(rel, spec, [op], SearchConfig()),
                baseline_random(rel, spec, [op], None, SearchConfig()),
                baseline_grid(rel, spec, [op], None, SearchConfig())):
        assert out.best.pipeline == NOOP


def test_random_seeded():
    rel = city_table()
    spec = QualitySpec([SingletonCount("city_name")])
    ops = [_Fixed("city_name", 4, "a"), _Fixed("city_code", 4, "b")]
    a = baseline_random(rel, spec, ops, None, SearchConfig(seed=3), max_samples=5)
    b = baseline_random(rel, spec, ops, None, SearchConfig(seed=3), max_samples=5)
    assert a.best.pipeline == b.best.pipeline and a.expanded_count == 5


# -- convergence records ----------------------------------------------------------------


def test_records_collapse_and_close():
    rel, truth = _col("x", "y"), _col("a", "y")
    p = Pipeline((fr("v", "x", "a"),))
    trace = [TracePoint(0.0, 3.0, 0, NOOP), TracePoint(0.0, 2.0, 1, NOOP), TracePoint(0.5, 1.0, 4, p)]
    recs = records(trace, rel, truth, end_s=1.0)
    assert [(r.elapsed_s, r.best_cost) for r in recs] == [(0.0, 2.0), (0.5, 1.0), (1.0, 1.0)]
    assert recs[-1].f1 == 1.0 and recs[0].f1 == 0.0


# -- config and CLI --------------------------------------------------------------------


CITY_TOML = """\
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

[[operators]]
kind = "find_replace"
attrs = ["city_name"]

[search]
gamma = 1.0
max_depth = 1
time_budget_s = 5.0

[mode]
kind = "{mode}"

[output]
dir = "out"
"""


@pytest.fixture
def city_dir(tmp_path):
    write_csv(city_table(), str(tmp_path / "dirty.csv"))
    write_csv(Relation.from_rows(city_table().schema, [("San Francisco", "SF"), ("New York City", "NY"),
                                                       ("New York City", "NY")]),
              str(tmp_path / "truth.csv"))
    return tmp_path


def _write_cfg(d, text, name="run.toml"):
    p = d / name
    p.write_text(text, encoding="utf-8")
    return p


def test_config_loads(city_dir):
    cfg = load_config(_write_cfg(city_dir, CITY_TOML.format(mode="batch")))
    b = Built(cfg)
    assert cfg.mode == "batch" and cfg.search.max_depth == 1
    assert evaluate(b.spec, b.dirty).total_cost == 5.0
    assert [op.operator_id for op in b.operators] == ["find_replace"]


def test_config_unknown_key(city_dir):
    text = CITY_TOML.format(mode="batch").replace("gamma = 1.0", "gamma = 1.0\nbogus = 1")
    with pytest.raises(ConfigError, match="search.bogus"):
        load_config(_write_cfg(city_dir, text))


def test_config_missing_key(city_dir):
    text = CITY_TOML.format(mode="batch").replace('path = "dirty.csv"\n', "")
    with pytest.raises(ConfigError, match="input.path"):
        load_config(_write_cfg(city_dir, text))


def test_cli_clean_missing_key_exit_1(city_dir, capsys):
    text = CITY_TOML.format(mode="batch").replace('path = "dirty.csv"\n', "")
    assert main(["clean", "-c", str(_write_cfg(city_dir, text))]) == 1
    assert "input.path" in capsys.readouterr().err


@pytest.mark.parametrize("mode", ["batch", "async", "blocked", "parallel"])
def test_cli_clean_modes(city_dir, mode):
    cfg = _write_cfg(city_dir, CITY_TOML.format(mode=mode))
    assert main(["clean", "-c", str(cfg)]) == 0
    out = city_dir / "out"
    cleaned = load_csv(str(out / "cleaned.csv"))
    assert evaluate(QualitySpec([FdViolations(["city_code"], ["city_name"])]), cleaned).total_cost == 0
    recs = read_convergence(out / "convergence.csv")
    assert recs[-1].best_cost == 1.0


def test_cli_apply_round_trip(tmp_path, capsys):
    p = Pipeline((fr("city_name", "New York", "New York City"),))
    (tmp_path / "p.json").write_text(serialize_pipeline(p), encoding="utf-8")
    fresh = Relation.from_rows(city_table().schema, [("New York", "NY"), ("Boston", "BOS")])
    write_csv(fresh, str(tmp_path / "in.csv"))
    assert main(["apply", "-p", str(tmp_path / "p.json"), "-i", str(tmp_path / "in.csv"),
                 "-o", str(tmp_path / "out.csv")]) == 0
    got = load_csv(str(tmp_path / "out.csv"))
    assert got.column("city_name") == ["New York City", "Boston"]
    assert main(["inspect", "-p", str(tmp_path / "p.json")]) == 0
    assert "New York City" in capsys.readouterr().out


def test_cli_bench_headers(city_dir):
    cfg = _write_cfg(city_dir, CITY_TOML.format(mode="batch"))
    assert main(["bench", "-c", str(cfg), "--baselines", "grid,greedy,random"]) == 0
    headers = set()
    for name in ("cleanforge", "grid", "greedy", "random"):
        with open(city_dir / "out" / f"convergence_{name}.csv", newline="") as fh:
            headers.add(tuple(next(csv.reader(fh))))
    assert headers == {("elapsed_s", "best_cost", "f1", "expanded")}


def test_cli_exit_codes(tmp_path, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["frobnicate"]) == 1
        assert main(["apply", "-p", str(tmp_path / "nope.json"), "-i", "x", "-o", "y"]) == 2
        assert main(["gen", "dictionary", "--frac", "1.5", "-o", str(tmp_path)]) == 2
        assert main(["bench", "-c", "x.toml", "--baselines", "hyperopt"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"steps": 3}', encoding="utf-8")
    assert main(["inspect", "-p", str(bad)]) in (1, 2)
    capsys.readouterr()


def test_cli_gen_writes_runnable_sample(tmp_path):
    assert main(["gen", "city", "--groups", "8", "--seed", "2", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "run.toml").exists() and (tmp_path / "dirty.csv").exists()
    cfg = load_config(tmp_path / "run.toml")
    assert cfg.mode == "blocked"
