"""Greedy best-first search over repair pipelines.

The frontier holds candidate pipelines; each round extends every
frontier member (below the depth bound) with the pool's units it has not
tried yet, scores the children incrementally, and keeps the ones within
a factor ``1/gamma`` of the best cost.  The best pipeline seen so far is
available at any moment, and its cost trace never increases.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

from .quality import QualityReport, QualitySpec, eval_delta, evaluate
from .relation import Relation, hash_relation, rehash
from .repair_ir import (
    NOOP,
    ConditionalAssignment,
    Pipeline,
    apply_pipeline,
    is_literal_inverse,
    merge_disjoint,
)

Unit = tuple[ConditionalAssignment, ...]

NO_REPEAT, NO_INVERSE, NO_NOOP = "no_repeat", "no_inverse", "no_noop"
ALL_RULES = frozenset({NO_REPEAT, NO_INVERSE, NO_NOOP})


@dataclass(frozen=True)
class SearchConfig:
    gamma: float = 1.0
    max_depth: int = 3
    frontier_cap: int = 8
    time_budget_s: float = 30.0
    seed: int = 0
    static_rules: frozenset[str] = ALL_RULES
    merge_enabled: bool = False
    learn_enabled: bool = False
    cache_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "static_rules", frozenset(self.static_rules))
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.max_depth < 1 or self.frontier_cap < 1:
            raise ValueError("max_depth and frontier_cap must be >= 1")
        if self.time_budget_s < 0:
            raise ValueError("time_budget_s must be >= 0")
        unknown = self.static_rules - ALL_RULES
        if unknown:
            raise ValueError(f"unknown static rules: {sorted(unknown)}")


@dataclass(eq=False)
class Candidate:
    pipeline: Pipeline
    cost: float
    report: QualityReport
    result_hash: int
    materialized: Relation | None = None
    order: tuple = ()
    # units of the pool already tried from this candidate
    expanded_upto: int = 0

    @property
    def depth(self) -> int:
        return self.pipeline.depth

    def sort_key(self):
        return (self.cost, self.order, self.depth)


@dataclass(frozen=True)
class TracePoint:
    elapsed_s: float
    best_cost: float
    expanded: int
    pipeline: Pipeline = field(default=NOOP, compare=False, repr=False)


@dataclass
class SearchOutcome:
    best: Candidate
    expanded_count: int
    pruned_counts: dict[str, int]
    trace: list[TracePoint]
    rounds: int = 0
    pool_size: int = 0
    events: list = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


# -- pool sources -----------------------------------------------------------------


class PoolSource(Protocol):
    def drain(self) -> list[Unit]: ...

    @property
    def exhausted(self) -> bool: ...

    def wait(self, timeout: float) -> None: ...


class BatchPool:
    """All units available up front; drained once."""

    def __init__(self, units: Iterable[Sequence[ConditionalAssignment]]):
        self._units = [tuple(u) for u in units]
        self._drained = False

    def drain(self) -> list[Unit]:
        if self._drained:
            return []
        self._drained = True
        return self._units

    @property
    def exhausted(self) -> bool:
        return self._drained

    def wait(self, timeout: float) -> None:
        return None


# -- rules ------------------------------------------------------------------------


def static_prune(
    pipeline: Pipeline, new: ConditionalAssignment | Sequence[ConditionalAssignment], rules
) -> bool:
    """True when the syntactic rules reject appending ``new`` to ``pipeline``.

    ``no_noop`` needs the data and is enforced when the extension is scored.
    """
    if not pipeline.steps:
        return False
    unit = (new,) if isinstance(new, ConditionalAssignment) else tuple(new)
    last = pipeline.units[-1]
    if NO_REPEAT in rules and unit == last:
        return True
    if NO_INVERSE in rules and len(unit) == 1 and len(last) == 1:
        return is_literal_inverse(last[0], unit[0])
    return False


def count_language(
    sigma_size: int, max_len: int, rules=frozenset(), inverse: dict[int, int] | None = None
) -> int:
    """Number of length-``max_len`` words over ``sigma_size`` symbols that pass the rules.

    ``inverse`` pairs symbols for ``no_inverse``; adjacent symbols are the
    only ones the rules inspect.
    """
    if sigma_size < 1:
        raise ValueError("sigma_size must be >= 1")
    if max_len == 0:
        return 1
    inverse = inverse or {}
    rep, inv = NO_REPEAT in rules, NO_INVERSE in rules
    ways = [1] * sigma_size
    for _ in range(max_len - 1):
        total = sum(ways)
        nxt = []
        for s in range(sigma_size):
            n = total
            if rep:
                n -= ways[s]
            if inv:
                # predecessors p whose inverse is s
                for p in range(sigma_size):
                    if inverse.get(p) == s and not (rep and p == s):
                        n -= ways[p]
            nxt.append(n)
        ways = nxt
    return sum(ways)


def retain(candidates: Sequence[Candidate], gamma: float, cap: int) -> list[Candidate]:
    """Keep candidates within ``best / gamma`` (only zero-cost ones if best is 0), at most ``cap``."""
    if not candidates:
        return []
    best = min(c.cost for c in candidates)
    if best > 0:
        bound = best / gamma
        kept = [c for c in candidates if c.cost <= bound]
    else:
        kept = [c for c in candidates if c.cost == 0]
    kept.sort(key=Candidate.sort_key)
    return kept[:cap]


# -- engine -----------------------------------------------------------------------


class Engine:
    """Per-run state shared by the sequential and parallel drivers."""

    def __init__(
        self,
        root: Relation,
        spec: QualitySpec,
        cfg: SearchConfig,
        model=None,
        start: float | None = None,
        root_report: QualityReport | None = None,
    ):
        spec.validate(root.schema)
        self.root, self.spec, self.cfg = root, spec, cfg
        self.model = model if cfg.learn_enabled else None
        self.start = time.perf_counter() if start is None else start
        report = root_report or evaluate(spec, root)
        self.root_candidate = Candidate(
            NOOP, report.total_cost, report, hash_relation(root), root, (0, 0, 0)
        )
        self.seen: set[int] = {self.root_candidate.result_hash}
        # read-only hashes owned by someone else (the parallel driver)
        self.shared_seen: set[int] = set()
        self.created: list[int] = []
        self.expanded = 0
        self.pruned = {NO_REPEAT: 0, NO_INVERSE: 0, NO_NOOP: 0, "duplicate": 0, "learned": 0}
        self.best = self.root_candidate
        self.trace = [TracePoint(0.0, report.total_cost, 0, NOOP)]
        self._lru: OrderedDict[int, Candidate] = OrderedDict()
        self._lru_cap = max(1, cfg.cache_size or cfg.frontier_cap)
        self._model_cache: dict[Unit, bool] = {}

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def out_of_time(self) -> bool:
        return self.elapsed() >= self.cfg.time_budget_s

    # materialization

    def materialize(self, cand: Candidate) -> Relation:
        if cand.materialized is None:
            cand.materialized = apply_pipeline(cand.pipeline, self.root)[0]
        self._touch(cand)
        return cand.materialized

    def _touch(self, cand: Candidate) -> None:
        if cand.pipeline is NOOP or not cand.pipeline.steps:
            return
        self._lru[cand.result_hash] = cand
        self._lru.move_to_end(cand.result_hash)
        while len(self._lru) > self._lru_cap:
            _, old = self._lru.popitem(last=False)
            old.materialized = None

    def settle(self, kept: Iterable[Candidate], dropped: Iterable[Candidate]) -> None:
        for c in dropped:
            if c.result_hash not in self._lru:
                c.materialized = None
        for c in kept:
            if c.materialized is not None:
                self._touch(c)

    # scoring

    def accepts(self, unit: Unit) -> bool:
        if self.model is None:
            return True
        hit = self._model_cache.get(unit)
        if hit is None:
            hit = any(self.model.accepts(ca, self.root.schema) for ca in unit)
            self._model_cache[unit] = hit
        return hit

    def extend(self, parent: Candidate, unit: Unit, order: tuple) -> Candidate | None:
        rules = self.cfg.static_rules
        if static_prune(parent.pipeline, unit, rules):
            last = parent.pipeline.units[-1]
            self.pruned[NO_REPEAT if unit == last else NO_INVERSE] += 1
            return None
        if not self.accepts(unit):
            self.pruned["learned"] += 1
            return None
        base = self.materialize(parent)
        result, deltas = apply_pipeline(unit, base)
        self.expanded += 1
        if not deltas and NO_NOOP in rules:
            self.pruned[NO_NOOP] += 1
            return None
        h = rehash(parent.result_hash, self.root.schema, deltas)
        if h in self.seen or h in self.shared_seen:
            self.pruned["duplicate"] += 1
            return None
        self.seen.add(h)
        self.created.append(h)
        report = eval_delta(self.spec, base, parent.report, deltas, result)
        child = Candidate(parent.pipeline.extend(unit), report.total_cost, report, h, result, order)
        self.offer_best(child)
        return child

    def score_pipeline(self, p: Pipeline) -> Candidate:
        result, deltas = apply_pipeline(p, self.root)
        rc = self.root_candidate
        report = eval_delta(self.spec, self.root, rc.report, deltas, result)
        h = rehash(rc.result_hash, self.root.schema, deltas)
        return Candidate(p, report.total_cost, report, h, result)

    def offer_best(self, cand: Candidate) -> bool:
        b = self.best
        if cand.cost < b.cost or (cand.cost == b.cost and cand.sort_key() < b.sort_key()):
            improved = cand.cost < b.cost
            self.best = cand
            if improved:
                self.trace.append(TracePoint(self.elapsed(), cand.cost, self.expanded, cand.pipeline))
            return True
        return False

    def merge(self, frontier: list[Candidate], children: list[Candidate], rnd: int) -> list[Candidate]:
        """Disjoint-path merging over the improving children."""
        parents = {id(c): c for c in frontier}
        improving = [c for c in children if c.cost < self._parent_cost(c, parents)]
        improving.sort(key=Candidate.sort_key)
        improving = improving[: self.cfg.frontier_cap * 2]
        if len(improving) < 2:
            return []
        by_steps = {c.pipeline.steps: c for c in improving}
        scored: dict[tuple, Candidate] = {}

        def cand_for(p: Pipeline) -> Candidate:
            c = by_steps.get(p.steps) or scored.get(p.steps)
            if c is None:
                c = self.score_pipeline(p)
                scored[p.steps] = c
            return c

        merged = merge_disjoint(
            [c.pipeline for c in improving],
            self.root,
            self.spec,
            cost_of=lambda p: cand_for(p).cost,
            hash_of=lambda p: cand_for(p).result_hash,
        )
        out = []
        for i, p in enumerate(merged):
            c = cand_for(p)
            if p.steps in by_steps or p.depth > self.cfg.max_depth or c.result_hash in self.seen:
                continue
            self.seen.add(c.result_hash)
            c.order = (rnd, 1 << 40, i)
            self.offer_best(c)
            out.append(c)
        return out

    def _parent_cost(self, child: Candidate, parents: dict) -> float:
        # parent is the frontier member whose pipeline is the child's prefix
        n = child.depth - 1
        for p in parents.values():
            if p.depth == n and p.pipeline.units == child.pipeline.units[:n]:
                return p.cost
        return float("inf")

    def outcome(self, rounds: int, pool_size: int, events=None, warnings=None) -> SearchOutcome:
        return SearchOutcome(
            self.best,
            self.expanded,
            dict(self.pruned),
            list(self.trace),
            rounds,
            pool_size,
            list(events or []),
            list(warnings or []),
        )


def _merge_unique(units: list[Unit], keys: set[Unit], new: Iterable[Unit]) -> int:
    added = 0
    for u in new:
        u = tuple(u)
        if u not in keys:
            keys.add(u)
            units.append(u)
            added += 1
    return added


def expand(
    frontier: Sequence[Candidate],
    pool: Sequence[Unit],
    engine: Engine,
    rnd: int = 1,
    deadline: Callable[[], bool] | None = None,
) -> list[Candidate]:
    """Children of every frontier member below the depth bound, over its untried units."""
    k = engine.cfg.max_depth
    out: list[Candidate] = []
    for rank, cand in enumerate(frontier):
        if cand.depth >= k:
            continue
        for ui in range(cand.expanded_upto, len(pool)):
            if deadline is not None and deadline():
                return out
            child = engine.extend(cand, pool[ui], (rnd, rank, ui))
            cand.expanded_upto = ui + 1
            if child is not None:
                out.append(child)
    return out


def search(
    root: Relation,
    pool_source: PoolSource | Iterable[Sequence[ConditionalAssignment]],
    spec: QualitySpec,
    cfg: SearchConfig,
    model=None,
    wait_step_s: float = 0.02,
    start: float | None = None,
) -> SearchOutcome:
    """Anytime greedy best-first search (see module docstring).

    ``start`` lets a caller share its ``time.perf_counter`` origin with
    the trace timestamps.
    """
    if not hasattr(pool_source, "drain"):
        pool_source = BatchPool(pool_source)
    eng = Engine(root, spec, cfg, model, start)
    units: list[Unit] = []
    keys: set[Unit] = set()
    frontier = [eng.root_candidate]
    rounds = 0
    warnings: list[str] = []
    if cfg.time_budget_s <= 0:
        return eng.outcome(0, 0)
    while not eng.out_of_time():
        _merge_unique(units, keys, pool_source.drain())
        exhausted = pool_source.exhausted
        if eng.best.cost == 0:
            break
        pending = any(c.depth < cfg.max_depth and c.expanded_upto < len(units) for c in frontier)
        if not pending:
            if exhausted:
                break
            pool_source.wait(min(wait_step_s, max(0.0, cfg.time_budget_s - eng.elapsed())))
            continue
        rounds += 1
        before = eng.best.cost
        children = expand(frontier, units, eng, rounds, eng.out_of_time)
        if cfg.merge_enabled and children:
            children += eng.merge(frontier, children, rounds)
        pool = frontier + children
        kept = retain(pool, cfg.gamma, cfg.frontier_cap)
        kept_ids = {id(c) for c in kept}
        eng.settle(kept, [c for c in pool if id(c) not in kept_ids])
        frontier = kept
        improved = eng.best.cost < before
        if all(c.depth >= cfg.max_depth for c in frontier):
            break
        if not improved and pool_source.exhausted and not _more_units(pool_source, units, keys):
            break
    if not units:
        warnings.append("EmptyPool: no repair candidates were produced")
    return eng.outcome(rounds, len(units), warnings=warnings)


def _more_units(src: PoolSource, units: list[Unit], keys: set[Unit]) -> bool:
    return _merge_unique(units, keys, src.drain()) > 0
