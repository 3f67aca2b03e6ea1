"""Reference tuners the search is compared against.

All three treat operators as black boxes: a joint parameter setting is
turned into repairs, applied wholesale, and scored once at the end.
"""

from __future__ import annotations

import itertools
import random
import time
from typing import Sequence

from ..operators import Operator, ParamSetting
from ..quality import QualitySpec, evaluate
from ..relation import Relation, hash_relation
from ..repair_ir import NOOP, Pipeline, apply_pipeline
from ..search import Candidate, SearchConfig, SearchOutcome, TracePoint


class _Tracker:
    def __init__(self, root: Relation, spec: QualitySpec, budget: float):
        self.start = time.perf_counter()
        self.budget = budget
        self.spec = spec
        report = evaluate(spec, root)
        self.best = Candidate(NOOP, report.total_cost, report, hash_relation(root), root)
        self.trace = [TracePoint(0.0, report.total_cost, 0, NOOP)]
        self.evals = 0

    def out_of_time(self) -> bool:
        return time.perf_counter() - self.start >= self.budget

    def offer(self, pipeline: Pipeline, result: Relation) -> None:
        report = evaluate(self.spec, result)
        self.evals += 1
        if report.total_cost < self.best.cost:
            self.best = Candidate(pipeline, report.total_cost, report, hash_relation(result), result)
            self.trace.append(TracePoint(time.perf_counter() - self.start, report.total_cost,
                                         self.evals, pipeline))

    def outcome(self) -> SearchOutcome:
        return SearchOutcome(self.best, self.evals, {}, self.trace)


def cascade(root: Relation, ops: Sequence[Operator], settings: Sequence[ParamSetting]
            ) -> tuple[Pipeline, Relation]:
    """Run operators in order, each on the previous one's output."""
    cur, units = root, []
    for op, s in zip(ops, settings):
        cas = op.collect(cur, s)
        if cas:
            cur, _ = apply_pipeline(cas, cur)
            units.append(tuple(cas))
    return Pipeline.from_units(units), cur


def _by_id(operators: Sequence[Operator], order: Sequence[str]) -> list[Operator]:
    ids = {op.operator_id: op for op in operators}
    missing = set(ids) - set(order)
    if missing:
        raise ValueError(f"order does not cover operators {sorted(missing)}")
    unknown = [i for i in order if i not in ids]
    if unknown or len(set(order)) != len(order):
        raise ValueError(f"order must list each operator once, got {list(order)}")
    return [ids[i] for i in order]


def baseline_grid(root: Relation, spec: QualitySpec, operators: Sequence[Operator],
                  order: Sequence[str] | None, cfg: SearchConfig) -> SearchOutcome:
    """Exhaustive joint grid over a fixed operator cascade."""
    ops = _by_id(operators, [op.operator_id for op in operators] if order is None else order)
    tr = _Tracker(root, spec, cfg.time_budget_s)
    grids = [list(op.settings()) for op in ops]
    for combo in itertools.product(*grids):
        if tr.out_of_time():
            break
        tr.offer(*cascade(root, ops, combo))
    return tr.outcome()


def baseline_greedy(root: Relation, spec: QualitySpec, operators: Sequence[Operator],
                    cfg: SearchConfig) -> SearchOutcome:
    """Tune each operator alone against the root; keep the single best one."""
    tr = _Tracker(root, spec, cfg.time_budget_s)
    for op in operators:
        for s in op.settings():
            if tr.out_of_time():
                return tr.outcome()
            tr.offer(*cascade(root, [op], [s]))
    return tr.outcome()


def baseline_random(root: Relation, spec: QualitySpec, operators: Sequence[Operator],
                    order: Sequence[str] | None, cfg: SearchConfig,
                    max_samples: int | None = None) -> SearchOutcome:
    """Seeded uniform samples of joint cascade settings under the time budget."""
    ops = _by_id(operators, [op.operator_id for op in operators] if order is None else order)
    tr = _Tracker(root, spec, cfg.time_budget_s)
    grids = [list(op.settings()) for op in ops]
    if any(not g for g in grids):
        return tr.outcome()
    rng = random.Random(cfg.seed)
    if max_samples is None:
        max_samples = 1
        for g in grids:
            max_samples *= len(g)
    for _ in range(max_samples):
        if tr.out_of_time():
            break
        tr.offer(*cascade(root, ops, [rng.choice(g) for g in grids]))
    return tr.outcome()
