"""Parameterized cleaning operators.

An operator declares a parameter space, and for one setting of those
parameters proposes candidate conditional assignments against a relation.
The ``*_candidates`` functions hold the detection/repair logic; the
:class:`Operator` subclasses wrap them with a parameter space, provenance
stamping and the self no-op filter.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import NonNumeric, TypeMismatch
from .relation import Kind, Relation, Value
from .repair_ir import (
    AttrEquals,
    ConditionalAssignment,
    Predicate,
    Provenance,
    RowIdEquals,
    TupleEquals,
    changes_anything,
)
from .text import distance_matrix

CA = ConditionalAssignment
Unit = tuple[ConditionalAssignment, ...]

# -- parameter domains ---------------------------------------------------------


@dataclass(frozen=True)
class AttributeName:
    choices: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise ValueError("AttributeName needs at least one choice")

    def values(self) -> list[Value]:
        return list(self.choices)


@dataclass(frozen=True)
class Threshold:
    """``steps`` evenly spaced values in [lo, hi], most restrictive end first."""

    lo: float
    hi: float
    steps: int
    most_restrictive: str = "lo"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lo > self.hi:
            raise ValueError("lo must be <= hi")
        if self.most_restrictive not in ("lo", "hi"):
            raise ValueError("most_restrictive is 'lo' or 'hi'")

    def values(self) -> list[Value]:
        if self.steps == 1:
            vals = [float(self.lo if self.most_restrictive == "lo" else self.hi)]
            return vals
        span = self.hi - self.lo
        vals = [self.lo + span * i / (self.steps - 1) for i in range(self.steps)]
        vals[-1] = float(self.hi)
        vals = [float(v) for v in vals]
        return vals if self.most_restrictive == "lo" else vals[::-1]


@dataclass(frozen=True)
class Choice:
    options: tuple[Value, ...]

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError("Choice needs at least one value")

    def values(self) -> list[Value]:
        return list(self.options)


ParamDomain = AttributeName | Threshold | Choice


@dataclass(frozen=True)
class OperatorSpec:
    operator_id: str
    domains: tuple[tuple[str, ParamDomain], ...] = ()


@dataclass(frozen=True)
class ParamSetting:
    operator_id: str
    assignments: tuple[tuple[str, Value], ...]

    def __getitem__(self, name: str) -> Value:
        return dict(self.assignments)[name]

    def as_dict(self) -> dict[str, Value]:
        return dict(self.assignments)

    @property
    def digest(self) -> str:
        blob = json.dumps([self.operator_id, list(map(list, self.assignments))], sort_keys=True)
        return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()

    @property
    def numeric_params(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.assignments if isinstance(v, float))


def enumerate_settings(
    spec: OperatorSpec, sweep: str = "restrictive", seed: int = 0
) -> Iterator[ParamSetting]:
    """Stream the cross product of the domains.

    ``restrictive`` walks thresholds from their most restrictive end, the
    first domain varying slowest; ``random`` is a seeded shuffle of the
    same settings.
    """
    names = [n for n, _ in spec.domains]
    grids = [d.values() for _, d in spec.domains]
    combos: Iterable = itertools.product(*grids)
    if sweep == "random":
        combos = list(combos)
        random.Random(seed).shuffle(combos)
    elif sweep != "restrictive":
        raise ValueError(f"unknown sweep {sweep!r}")
    for combo in combos:
        yield ParamSetting(spec.operator_id, tuple(zip(names, combo)))


def grid_size(spec: OperatorSpec) -> int:
    return math.prod(len(d.values()) for _, d in spec.domains)


# -- candidate generators ------------------------------------------------------


def _text_domain(rel: Relation, attr: str) -> Counter:
    if rel.schema.kind(attr) is not Kind.TEXT:
        raise TypeMismatch(f"{attr!r} must be a Text attribute")
    return Counter(v for v in rel.column(attr) if v is not None)


def _eq(attr: str, v: Value) -> Predicate:
    return Predicate(AttrEquals(attr, v))


def find_replace_candidates(rel: Relation, attr: str) -> list[CA]:
    """Every ``x -> y`` rewrite between distinct non-null values, lexicographic in (x, y)."""
    dom = sorted(_text_domain(rel, attr))
    return [CA(_eq(attr, x), attr, y) for x in dom for y in dom if x != y]


def dictionary_spell_candidates(
    rel: Relation, attr: str, words: Iterable[str], d: int
) -> list[CA]:
    """Snap out-of-dictionary values to their unique nearest word within ``d`` edits."""
    vocab = frozenset(words)
    misses = sorted(v for v in _text_domain(rel, attr) if v not in vocab)
    if not misses or not vocab or d < 1:
        return []
    wl = sorted(vocab)
    dist = distance_matrix(misses, wl, d)
    best = dist.min(axis=1)
    out = []
    for i, v in enumerate(misses):
        b = int(best[i])
        if b > d:
            continue
        hits = np.flatnonzero(dist[i] == b)
        if len(hits) == 1:
            out.append(CA(_eq(attr, v), attr, wl[hits[0]]))
    return out


def edit_dist_match_candidates(rel: Relation, attr: str, d: int) -> list[CA]:
    """Rewrite a value to its most frequent neighbour within ``d`` edits, if strictly more frequent."""
    counts = _text_domain(rel, attr)
    vals = sorted(counts)
    if len(vals) < 2 or d < 1:
        return []
    dist = distance_matrix(vals, vals, d)
    out = []
    for i, v in enumerate(vals):
        best = None
        for j in np.flatnonzero(dist[i] <= d):
            u = vals[j]
            if j == i or counts[u] <= counts[v]:
                continue
            # sorted scan: first of the top count is the lexicographically smallest
            if best is None or counts[u] > counts[best]:
                best = u
        if best is not None:
            out.append(CA(_eq(attr, v), attr, best))
    return out


def _value_order(v: Value):
    return (v is None, v if v is not None else "")


def fd_chase_candidates(rel: Relation, lhs: Sequence[str], rhs: str) -> list[CA]:
    """One majority-vote rewrite of ``rhs`` per lhs group that violates ``lhs -> rhs``."""
    lhs = tuple(lhs)
    lcols = [rel.column(a) for a in lhs]
    rcol = rel.column(rhs)
    groups: dict[tuple, Counter] = {}
    for p in range(len(rel)):
        groups.setdefault(tuple(c[p] for c in lcols), Counter())[rcol[p]] += 1
    out = []
    for key, c in groups.items():
        if len(c) < 2:
            continue
        top = max(c.values())
        w = min((v for v, n in c.items() if n == top), key=_value_order)
        pred = _eq(lhs[0], key[0]) if len(lhs) == 1 else Predicate(TupleEquals(lhs, key))
        out.append(CA(pred, rhs, w))
    return out


def _series(
    rel: Relation, value_attr: str, order_attr: str, numeric: bool = True
) -> tuple[list[int], list[Value]]:
    if numeric and rel.schema.kind(value_attr) is not Kind.NUMBER:
        raise NonNumeric(f"{value_attr!r} is not a Number attribute")
    ocol, vcol, ids = rel.column(order_attr), rel.column(value_attr), rel.row_ids
    order = sorted(
        range(len(rel)),
        key=lambda p: (ocol[p] is None, ocol[p] if ocol[p] is not None else 0, ids[p]),
    )
    return order, [vcol[p] for p in order]


def _repair_flagged(rel, value_attr, order, ys, flagged: set[int]) -> list[CA]:
    out, last = [], None
    for i, p in enumerate(order):
        if i in flagged:
            out.append(CA(Predicate(RowIdEquals(rel.row_ids[p])), value_attr, last))
        elif ys[i] is not None:
            last = ys[i]
    return out


def gaussian_outlier_candidates(
    rel: Relation, value_attr: str, order_attr: str, K: float, window: int
) -> list[CA]:
    """Flag values more than ``K`` population std-devs from their sliding-window mean."""
    order, ys = _series(rel, value_attr, order_attr)
    w = int(window)
    if len(ys) < w or w < 2:
        return []
    arr = np.array([np.nan if y is None else y for y in ys], dtype=float)
    win = np.lib.stride_tricks.sliding_window_view(arr, w)
    valid = ~np.isnan(win)
    cnt = valid.sum(axis=1)
    filled = np.where(valid, win, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = filled.sum(axis=1) / cnt
        var = (np.where(valid, (win - mu[:, None]) ** 2, 0.0)).sum(axis=1) / cnt
    sigma = np.sqrt(var)
    flagged: set[int] = set()
    for s in range(win.shape[0]):
        if not cnt[s] or not sigma[s] > 0:
            continue
        dev = np.abs(win[s] - mu[s]) > K * sigma[s]
        flagged.update(int(s + i) for i in np.flatnonzero(dev & valid[s]))
    return _repair_flagged(rel, value_attr, order, ys, flagged)


def histogram_outlier_candidates(
    rel: Relation,
    value_attr: str,
    order_attr: str,
    peak_threshold: float,
    outlier_threshold: float,
    window: int,
) -> list[CA]:
    """In windows with a dominant value, flag the rare ones (any value kind)."""
    order, ys = _series(rel, value_attr, order_attr, numeric=False)
    w = int(window)
    if len(ys) < w or w < 2 or outlier_threshold > peak_threshold:
        return []
    flagged: set[int] = set()
    counts = Counter(y for y in ys[:w] if y is not None)
    for s in range(len(ys) - w + 1):
        if s:
            out_v, in_v = ys[s - 1], ys[s + w - 1]
            if out_v is not None:
                counts[out_v] -= 1
                if not counts[out_v]:
                    del counts[out_v]
            if in_v is not None:
                counts[in_v] += 1
        total = sum(counts.values())
        if not total or max(counts.values()) / total < peak_threshold:
            continue
        for i in range(s, s + w):
            y = ys[i]
            if y is not None and counts[y] / total < outlier_threshold:
                flagged.add(i)
    return _repair_flagged(rel, value_attr, order, ys, flagged)


_MERSENNE = (1 << 61) - 1


def _shingles(v: str, k: int) -> frozenset[str]:
    if len(v) <= k:
        return frozenset([v])
    return frozenset(v[i : i + k] for i in range(len(v) - k + 1))


def _base_hash(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode(), digest_size=8).digest(), "little")


def minhash_dedup_candidates(
    rel: Relation,
    attr: str,
    jaccard_threshold: float,
    shingle_k: int,
    num_hashes: int,
    bands: int,
    seed: int = 0,
) -> list[CA]:
    """LSH-banded minhash pairs, verified by exact Jaccard; the rarer value maps to the commoner."""
    if num_hashes % bands:
        raise ValueError("num_hashes must be divisible by bands")
    counts = _text_domain(rel, attr)
    vals = sorted(counts)
    rng = random.Random(seed)
    coeffs = [(rng.randrange(1, _MERSENNE), rng.randrange(_MERSENNE)) for _ in range(num_hashes)]
    shingles = [_shingles(v, shingle_k) for v in vals]
    rows = num_hashes // bands
    buckets: dict[tuple, list[int]] = {}
    for idx, sh in enumerate(shingles):
        hs = [_base_hash(s) for s in sh]
        sig = [min((a * h + b) % _MERSENNE for h in hs) for a, b in coeffs]
        for band in range(bands):
            key = (band, *sig[band * rows : (band + 1) * rows])
            buckets.setdefault(key, []).append(idx)
    pairs: set[tuple[int, int]] = set()
    for members in buckets.values():
        for i, j in itertools.combinations(members, 2):
            pairs.add((i, j))
    out = []
    for i, j in sorted(pairs):
        a, b = shingles[i], shingles[j]
        if len(a & b) / len(a | b) < jaccard_threshold:
            continue
        # i < j in sorted order, so i wins count ties
        win, lose = (i, j) if counts[vals[i]] >= counts[vals[j]] else (j, i)
        out.append(CA(_eq(attr, vals[lose]), attr, vals[win]))
    return out


def coarsen(cas: Sequence[CA], mode: str = "fine") -> list[Unit]:
    """Group CAs into search units: one per CA, or one per (operator, setting)."""
    if mode == "fine":
        return [(c,) for c in cas]
    if mode != "coarse":
        raise ValueError(f"unknown coarsen mode {mode!r}")
    groups: dict[tuple[str, str], list[CA]] = {}
    for c in cas:
        groups.setdefault((c.provenance.operator, c.provenance.params_digest), []).append(c)
    return [tuple(g) for g in groups.values()]


# -- operator wrappers -------------------------------------------------------------


class Operator:
    """Parameter space plus candidate generation for one cleaning method."""

    kind = "abstract"

    def __init__(self, operator_id: str | None = None, domains: Mapping[str, ParamDomain] = ()):
        self.operator_id = operator_id or self.kind
        self.domains = dict(domains)

    @property
    def spec(self) -> OperatorSpec:
        return OperatorSpec(self.operator_id, tuple(self.domains.items()))

    def settings(self, sweep: str = "restrictive", seed: int = 0) -> Iterator[ParamSetting]:
        return enumerate_settings(self.spec, sweep, seed)

    def propose(self, rel: Relation, params: dict[str, Value]) -> list[CA]:
        raise NotImplementedError

    def collect(self, rel: Relation, setting: ParamSetting) -> list[CA]:
        """Provenance-stamped proposals that change ``rel``, without duplicates."""
        prov = Provenance(self.operator_id, setting.digest, setting.numeric_params)
        out, seen = [], set()
        for ca in self.propose(rel, setting.as_dict()):
            if ca in seen or not changes_anything(ca, rel):
                continue
            seen.add(ca)
            out.append(replace(ca, provenance=prov))
        return out

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.operator_id!r})"


class FindReplace(Operator):
    kind = "find_replace"

    def __init__(self, attrs: Sequence[str], operator_id: str | None = None):
        super().__init__(operator_id, {"attr": AttributeName(tuple(attrs))})

    def propose(self, rel, params):
        return find_replace_candidates(rel, params["attr"])


class DictionarySpell(Operator):
    kind = "dictionary_spell"

    def __init__(
        self,
        attrs: Sequence[str],
        words: Iterable[str],
        d: Threshold = Threshold(0, 3, 4, "lo"),
        operator_id: str | None = None,
    ):
        super().__init__(operator_id, {"attr": AttributeName(tuple(attrs)), "d": d})
        self.words = frozenset(words)

    def propose(self, rel, params):
        return dictionary_spell_candidates(rel, params["attr"], self.words, int(params["d"]))


class EditDistMatch(Operator):
    kind = "edit_dist_match"

    def __init__(
        self,
        attrs: Sequence[str],
        d: Threshold = Threshold(1, 3, 3, "lo"),
        operator_id: str | None = None,
    ):
        super().__init__(operator_id, {"attr": AttributeName(tuple(attrs)), "d": d})

    def propose(self, rel, params):
        return edit_dist_match_candidates(rel, params["attr"], int(params["d"]))


class FdChase(Operator):
    kind = "fd_chase"

    def __init__(self, lhs: Sequence[str], rhs: str, operator_id: str | None = None):
        super().__init__(operator_id, {})
        self.lhs, self.rhs = tuple(lhs), rhs

    def propose(self, rel, params):
        return fd_chase_candidates(rel, self.lhs, self.rhs)


class GaussianOutlier(Operator):
    kind = "gaussian_outlier"

    def __init__(
        self,
        value_attr: str,
        order_attr: str,
        K: Threshold = Threshold(1.0, 4.0, 7, "hi"),
        window: Choice = Choice((5.0, 10.0, 20.0)),
        operator_id: str | None = None,
    ):
        super().__init__(operator_id, {"K": K, "window": window})
        self.value_attr, self.order_attr = value_attr, order_attr

    def propose(self, rel, params):
        return gaussian_outlier_candidates(
            rel, self.value_attr, self.order_attr, params["K"], int(params["window"])
        )


class HistogramOutlier(Operator):
    kind = "histogram_outlier"

    def __init__(
        self,
        value_attr: str,
        order_attr: str,
        peak: Threshold = Threshold(0.5, 0.9, 5, "hi"),
        outlier: Threshold = Threshold(0.05, 0.3, 6, "lo"),
        window: Choice = Choice((5.0, 10.0)),
        operator_id: str | None = None,
    ):
        super().__init__(operator_id, {"peak": peak, "outlier": outlier, "window": window})
        self.value_attr, self.order_attr = value_attr, order_attr

    def propose(self, rel, params):
        return histogram_outlier_candidates(
            rel,
            self.value_attr,
            self.order_attr,
            params["peak"],
            params["outlier"],
            int(params["window"]),
        )


class MinhashDedup(Operator):
    kind = "minhash_dedup"

    def __init__(
        self,
        attrs: Sequence[str],
        threshold: Threshold = Threshold(0.5, 0.9, 5, "hi"),
        shingle_k: Choice = Choice((2.0, 3.0)),
        num_hashes: int = 32,
        bands: int = 16,
        seed: int = 0,
        operator_id: str | None = None,
    ):
        super().__init__(
            operator_id,
            {"attr": AttributeName(tuple(attrs)), "threshold": threshold, "shingle_k": shingle_k},
        )
        self.num_hashes, self.bands, self.seed = num_hashes, bands, seed

    def propose(self, rel, params):
        return minhash_dedup_candidates(
            rel,
            params["attr"],
            params["threshold"],
            int(params["shingle_k"]),
            self.num_hashes,
            self.bands,
            self.seed,
        )


OPERATOR_KINDS: dict[str, type[Operator]] = {
    cls.kind: cls
    for cls in (
        FindReplace,
        DictionarySpell,
        EditDistMatch,
        FdChase,
        GaussianOutlier,
        HistogramOutlier,
        MinhashDedup,
    )
}


@dataclass
class Library:
    """Operators of one run; ids must be unique."""

    operators: list[Operator] = field(default_factory=list)

    def __post_init__(self):
        ids = [op.operator_id for op in self.operators]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValueError(f"duplicate operator ids: {sorted(dup)}")

    @property
    def ids(self) -> list[str]:
        return [op.operator_id for op in self.operators]

    def __iter__(self):
        return iter(self.operators)

    def __len__(self) -> int:
        return len(self.operators)


def collect_all(
    rel: Relation, library: Iterable[Operator], sweep: str = "restrictive", seed: int = 0
) -> list[CA]:
    """Batch pool: every operator, every setting, in library then sweep order."""
    out = []
    for op in library:
        for s in op.settings(sweep, seed):
            out.extend(op.collect(rel, s))
    return out
