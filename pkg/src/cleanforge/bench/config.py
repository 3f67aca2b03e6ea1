"""TOML run configuration.

Example::

    [input]
    path = "dirty.csv"
    truth = "truth.csv"            # optional, enables F1 columns
    dictionary = "dictionary.txt"  # optional, shared by dictionary terms/operators

    [[quality.terms]]
    kind = "fd_violations"
    lhs = ["city_code"]
    rhs = ["city_name"]
    weight = 1.0

    [[operators]]
    kind = "fd_chase"
    lhs = ["city_code"]
    rhs = "city_name"

    [search]
    gamma = 1.0
    max_depth = 3

    [mode]
    kind = "blocked"

    [output]
    dir = "out"

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..errors import ConfigError
from ..operators import (
    Choice,
    DictionarySpell,
    EditDistMatch,
    FdChase,
    FindReplace,
    GaussianOutlier,
    HistogramOutlier,
    MinhashDedup,
    Operator,
    Threshold,
)
from ..quality import (
    ArWindowError,
    DictionaryViolations,
    EditCost,
    FdViolations,
    QualitySpec,
    SingletonCount,
)
from ..relation import Relation, load_csv
from ..search import ALL_RULES, SearchConfig

MODES = ("batch", "async", "blocked", "parallel")


@dataclass
class RunConfig:
    input_path: Path
    truth_path: Path | None
    dictionary_path: Path | None
    quality: list[dict]
    operators: list[dict]
    search: SearchConfig
    mode: str = "batch"
    workers: int = 1
    coarsen: str = "fine"
    user_key: str | None = None
    min_blocks: int = 3
    capacity: int = 10_000
    sweep: str = "restrictive"
    delays: dict[str, float] = field(default_factory=dict)
    out_dir: Path = Path("out")
    cleaned_name: str = "cleaned.csv"
    pipeline_name: str = "pipeline.json"
    convergence_name: str = "convergence.csv"
    order: list[str] | None = None

    @property
    def cleaned_path(self) -> Path:
        return self.out_dir / self.cleaned_name

    @property
    def pipeline_path(self) -> Path:
        return self.out_dir / self.pipeline_name

    @property
    def convergence_path(self) -> Path:
        return self.out_dir / self.convergence_name


class _Section:
    """Typed, path-aware accessor that also rejects unknown keys."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a table")
        self.data, self.path, self.used = data, path, set()

    def _key(self, k: str) -> str:
        return f"{self.path}.{k}" if self.path else k

    def get(self, k: str, typ, default=..., check=None):
        self.used.add(k)
        if k not in self.data:
            if default is ...:
                raise ConfigError(f"missing required key {self._key(k)}")
            return default
        v = self.data[k]
        if typ is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if not isinstance(v, typ) or (isinstance(v, bool) and typ is not bool):
            raise ConfigError(f"{self._key(k)}: expected {getattr(typ, '__name__', typ)}")
        if check is not None and not check(v):
            raise ConfigError(f"{self._key(k)}: invalid value {v!r}")
        return v

    def strings(self, k: str, default=...) -> list[str]:
        v = self.get(k, list, default)
        if v is default and default is not ...:
            return v
        if not all(isinstance(x, str) for x in v):
            raise ConfigError(f"{self._key(k)}: expected a list of strings")
        return list(v)

    def sub(self, k: str, default=...) -> "_Section":
        self.used.add(k)
        if k not in self.data:
            if default is ...:
                raise ConfigError(f"missing required key {self._key(k)}")
            return _Section({}, self._key(k))
        return _Section(self.data[k], self._key(k))

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"unknown key {self._key(extra[0])}")


def _resolve(base: Path, p: str | None) -> Path | None:
    if p is None:
        return None
    q = Path(p)
    return q if q.is_absolute() else base / q


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    base = path.parent
    top = _Section(raw, "")

    inp = top.sub("input")
    input_path = _resolve(base, inp.get("path", str))
    truth = _resolve(base, inp.get("truth", str, None))
    dictionary = _resolve(base, inp.get("dictionary", str, None))
    inp.finish()

    q = top.sub("quality")
    terms = q.get("terms", list)
    if not terms:
        raise ConfigError("quality.terms: at least one term is required")
    quality = []
    for i, t in enumerate(terms):
        sec = _Section(t, f"quality.terms[{i}]")
        quality.append(_term_dict(sec))
    q.finish()

    ops_raw = top.get("operators", list)
    operators = []
    for i, o in enumerate(ops_raw):
        operators.append(_operator_dict(_Section(o, f"operators[{i}]")))

    s = top.sub("search", None)
    try:
        search = SearchConfig(
            gamma=s.get("gamma", float, 1.0),
            max_depth=s.get("max_depth", int, 3),
            frontier_cap=s.get("frontier_cap", int, 8),
            time_budget_s=s.get("time_budget_s", float, 30.0),
            seed=s.get("seed", int, 0),
            static_rules=frozenset(s.strings("static_rules", sorted(ALL_RULES))),
            merge_enabled=s.get("merge", bool, False),
            learn_enabled=s.get("learn", bool, False),
            cache_size=s.get("cache_size", int, None),
        )
    except ValueError as e:
        raise ConfigError(f"search: {e}") from e
    s.finish()

    m = top.sub("mode", None)
    mode = m.get("kind", str, "batch", lambda v: v in MODES)
    cfg = RunConfig(
        input_path=input_path,
        truth_path=truth,
        dictionary_path=dictionary,
        quality=quality,
        operators=operators,
        search=search,
        mode=mode,
        workers=m.get("workers", int, 1, lambda v: v >= 1),
        coarsen=m.get("coarsen", str, "fine", lambda v: v in ("fine", "coarse")),
        user_key=m.get("user_key", str, None),
        min_blocks=m.get("min_blocks", int, 3, lambda v: v >= 0),
        capacity=m.get("capacity", int, 10_000, lambda v: v >= 1),
        sweep=m.get("sweep", str, "restrictive", lambda v: v in ("restrictive", "random")),
        order=m.strings("order", None),
    )
    delays = m.sub("delays", None)
    for k in list(delays.data):
        cfg.delays[k] = delays.get(k, float)
    delays.finish()
    m.finish()

    out = top.sub("output", None)
    cfg.out_dir = _resolve(base, out.get("dir", str, "out"))
    cfg.cleaned_name = out.get("cleaned", str, "cleaned.csv")
    cfg.pipeline_name = out.get("pipeline", str, "pipeline.json")
    cfg.convergence_name = out.get("convergence", str, "convergence.csv")
    out.finish()
    top.finish()
    return cfg


def _threshold(sec: _Section, k: str, default: Threshold) -> Threshold:
    if k not in sec.data:
        sec.used.add(k)
        return default
    t = sec.sub(k)
    try:
        out = Threshold(
            t.get("lo", float),
            t.get("hi", float),
            t.get("steps", int),
            t.get("most_restrictive", str, default.most_restrictive),
        )
    except ValueError as e:
        raise ConfigError(f"{t.path}: {e}") from e
    t.finish()
    return out


def _numbers(sec: _Section, k: str, default: Choice) -> Choice:
    v = sec.get(k, list, None)
    if v is None:
        return default
    if not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{sec._key(k)}: expected a nonempty list of numbers")
    return Choice(tuple(float(x) for x in v))


_TERM_KEYS = {
    "fd_violations": {"lhs", "rhs"},
    "singleton_count": {"group_attr"},
    "ar_window_error": {"value_attr", "order_attr", "window"},
    "edit_cost": {"baseline", "attrs"},
    "dictionary_violations": {"attr", "dictionary"},
}


def _term_dict(sec: _Section) -> dict:
    kind = sec.get("kind", str, check=lambda v: v in _TERM_KEYS)
    out: dict[str, Any] = {"kind": kind, "weight": sec.get("weight", float, 1.0)}
    if kind == "fd_violations":
        out["lhs"], out["rhs"] = sec.strings("lhs"), sec.strings("rhs")
    elif kind == "singleton_count":
        out["group_attr"] = sec.get("group_attr", str)
    elif kind == "ar_window_error":
        out["value_attr"] = sec.get("value_attr", str)
        out["order_attr"] = sec.get("order_attr", str)
        out["window"] = sec.get("window", int)
    elif kind == "edit_cost":
        out["baseline"] = sec.get("baseline", str, "input")
        out["attrs"] = sec.strings("attrs", None)
    else:
        out["attr"] = sec.get("attr", str)
        out["dictionary"] = sec.get("dictionary", str, None)
    sec.finish()
    return out


def _operator_dict(sec: _Section) -> dict:
    kinds = ("find_replace", "dictionary_spell", "edit_dist_match", "fd_chase",
             "gaussian_outlier", "histogram_outlier", "minhash_dedup")
    kind = sec.get("kind", str, check=lambda v: v in kinds)
    out: dict[str, Any] = {"kind": kind, "id": sec.get("id", str, None)}
    if kind in ("find_replace", "dictionary_spell", "edit_dist_match", "minhash_dedup"):
        out["attrs"] = sec.strings("attrs")
    if kind == "dictionary_spell":
        out["dictionary"] = sec.get("dictionary", str, None)
        out["d"] = _threshold(sec, "d", Threshold(0, 3, 4, "lo"))
    elif kind == "edit_dist_match":
        out["d"] = _threshold(sec, "d", Threshold(1, 3, 3, "lo"))
    elif kind == "fd_chase":
        out["lhs"], out["rhs"] = sec.strings("lhs"), sec.get("rhs", str)
    elif kind == "gaussian_outlier":
        out["value_attr"], out["order_attr"] = sec.get("value_attr", str), sec.get("order_attr", str)
        out["K"] = _threshold(sec, "K", Threshold(1.0, 4.0, 7, "hi"))
        out["window"] = _numbers(sec, "window", Choice((5.0, 10.0, 20.0)))
    elif kind == "histogram_outlier":
        out["value_attr"], out["order_attr"] = sec.get("value_attr", str), sec.get("order_attr", str)
        out["peak"] = _threshold(sec, "peak", Threshold(0.5, 0.9, 5, "hi"))
        out["outlier"] = _threshold(sec, "outlier", Threshold(0.05, 0.3, 6, "lo"))
        out["window"] = _numbers(sec, "window", Choice((5.0, 10.0)))
    elif kind == "minhash_dedup":
        out["threshold"] = _threshold(sec, "threshold", Threshold(0.5, 0.9, 5, "hi"))
        out["shingle_k"] = _numbers(sec, "shingle_k", Choice((2.0, 3.0)))
        out["num_hashes"] = sec.get("num_hashes", int, 32, lambda v: v >= 1)
        out["bands"] = sec.get("bands", int, 16, lambda v: v >= 1)
    sec.finish()
    return out


def read_words(path: Path) -> list[str]:
    from ..errors import IoError

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read dictionary {path}: {e}") from e
    return [w.strip() for w in text.splitlines() if w.strip()]


class Built:
    """Objects materialized from a RunConfig against loaded data."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dirty: Relation = load_csv(str(cfg.input_path))
        self.truth: Relation | None = (
            load_csv(str(cfg.truth_path), self.dirty.schema) if cfg.truth_path else None
        )
        self._words: dict[Path, list[str]] = {}
        self.spec = QualitySpec([self._term(t) for t in cfg.quality])
        self.spec.validate(self.dirty.schema)
        self.operators = [self._operator(o) for o in cfg.operators]

    def words(self, p: str | None, where: str) -> list[str]:
        path = _resolve(self.cfg.input_path.parent, p) if p else self.cfg.dictionary_path
        if path is None:
            raise ConfigError(f"{where}: no dictionary given (set it here or input.dictionary)")
        if path not in self._words:
            self._words[path] = read_words(path)
        return self._words[path]

    def _term(self, t: dict):
        w, kind = t["weight"], t["kind"]
        if kind == "fd_violations":
            return FdViolations(t["lhs"], t["rhs"], w)
        if kind == "singleton_count":
            return SingletonCount(t["group_attr"], w)
        if kind == "ar_window_error":
            return ArWindowError(t["value_attr"], t["order_attr"], t["window"], w)
        if kind == "edit_cost":
            if t["baseline"] == "input":
                base = self.dirty
            else:
                base = load_csv(str(_resolve(self.cfg.input_path.parent, t["baseline"])),
                                self.dirty.schema)
            return EditCost(base, w, t["attrs"])
        return DictionaryViolations(t["attr"], self.words(t["dictionary"], "quality"), w)

    def _operator(self, o: dict) -> Operator:
        kind, oid = o["kind"], o["id"]
        if kind == "find_replace":
            return FindReplace(o["attrs"], oid)
        if kind == "dictionary_spell":
            return DictionarySpell(o["attrs"], self.words(o["dictionary"], "operators"), o["d"], oid)
        if kind == "edit_dist_match":
            return EditDistMatch(o["attrs"], o["d"], oid)
        if kind == "fd_chase":
            return FdChase(o["lhs"], o["rhs"], oid)
        if kind == "gaussian_outlier":
            return GaussianOutlier(o["value_attr"], o["order_attr"], o["K"], o["window"], oid)
        if kind == "histogram_outlier":
            return HistogramOutlier(o["value_attr"], o["order_attr"], o["peak"], o["outlier"],
                                    o["window"], oid)
        return MinhashDedup(o["attrs"], o["threshold"], o["shingle_k"], o["num_hashes"],
                            o["bands"], seed=0, operator_id=oid)
