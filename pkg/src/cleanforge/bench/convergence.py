"""Convergence logs: one row per best-cost improvement."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

from ..relation import Relation
from ..repair_ir import apply_pipeline
from ..search import TracePoint
from .metrics import f1

COLUMNS = ("elapsed_s", "best_cost", "f1", "expanded")


@dataclass(frozen=True)
class ConvergenceRecord:
    elapsed_s: float
    best_cost: float
    f1: float | None
    expanded: int


def records(trace: Sequence[TracePoint], dirty: Relation, truth: Relation | None,
            end_s: float | None = None) -> list[ConvergenceRecord]:
    """Turn a trace into records with strictly increasing timestamps.

    Points sharing a timestamp collapse to the last one.  ``end_s`` appends
    a closing row carrying the final best cost, so a log always spans the
    whole run.
    """
    out: list[ConvergenceRecord] = []
    for tp in trace:
        score = None
        if truth is not None:
            cleaned, _ = apply_pipeline(tp.pipeline, dirty)
            score = f1(dirty, cleaned, truth)[2]
        rec = ConvergenceRecord(float(tp.elapsed_s), float(tp.best_cost), score, int(tp.expanded))
        if out and rec.elapsed_s <= out[-1].elapsed_s:
            rec = ConvergenceRecord(out[-1].elapsed_s, rec.best_cost, rec.f1, rec.expanded)
            out[-1] = rec
        else:
            out.append(rec)
    if end_s is not None and out and end_s > out[-1].elapsed_s:
        tail = out[-1]
        out.append(ConvergenceRecord(float(end_s), tail.best_cost, tail.f1, tail.expanded))
    return out


def write_convergence(path, recs: Sequence[ConvergenceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in recs:
            w.writerow([repr(r.elapsed_s), repr(r.best_cost),
                        "" if r.f1 is None else repr(r.f1), r.expanded])


def read_convergence(path) -> list[ConvergenceRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    return [ConvergenceRecord(float(a), float(b), float(c) if c else None, int(d))
            for a, b, c, d in rows[1:]]
