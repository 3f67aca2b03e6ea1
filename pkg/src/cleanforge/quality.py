"""Data-quality cost model: weighted sums of aggregate quality terms.

Lower cost is better; a clean relation scores 0 on every term.  Each
term evaluates from scratch and, where it can, maintains its value
incrementally from a list of cell deltas (the delta path must agree with
a full evaluation exactly).

Extension contract: subclass :class:`QualityTerm`, implement
``evaluate`` and optionally ``delta`` (returning ``None`` falls back to a
full evaluation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InconsistentDelta, NonNumeric, UnknownAttribute
from .relation import CellDelta, Kind, Relation, Schema, Value, values_equal
from .text import levenshtein

CELL, ROW, NONE = "cell", "row", "none"


class QualityTerm:
    kind = "abstract"
    separability = NONE

    def __init__(self, weight: float = 1.0):
        weight = float(weight)
        if not math.isfinite(weight) or weight < 0:
            raise ValueError(f"term weight must be finite and >= 0, got {weight}")
        self.weight = weight

    def attrs(self) -> tuple[str, ...]:
        return ()

    def validate(self, schema: Schema) -> None:
        for a in self.attrs():
            schema.index(a)

    def evaluate(self, rel: Relation) -> float:
        raise NotImplementedError

    def delta(
        self, base: Relation, base_value: float, deltas: Sequence[CellDelta], result: Relation
    ) -> float | None:
        return None

    def warning(self, rel: Relation) -> str | None:
        return None

    def restricted(self, row_ids: Iterable[int]) -> "QualityTerm":
        """Copy of this term for a row-restricted sub-relation."""
        return self

    def describe(self) -> dict:
        return {"kind": self.kind, "weight": self.weight}

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({params})"


def _touched(deltas: Sequence[CellDelta], attrs: Iterable[str]) -> list[int]:
    names = set(attrs)
    seen: dict[int, None] = {}
    for d in deltas:
        if d.attr in names:
            seen.setdefault(d.row_id, None)
    return list(seen)


# -- functional dependency violations ------------------------------------------


class _FdState:
    __slots__ = ("n", "sq", "pairs", "total")

    def __init__(self):
        self.n: dict = {}
        self.sq: dict = {}
        self.pairs: dict = {}
        self.total = 0


class FdViolations(QualityTerm):
    """Ordered row pairs agreeing on ``lhs`` and disagreeing on some ``rhs`` attribute.

    Per lhs-group with ``n`` rows and rhs-value counts ``c_v`` the group
    holds ``n**2 - sum(c_v**2)`` violating ordered pairs, which makes the
    count maintainable from group counters touched by changed rows only.
    """

    kind = "fd_violations"

    def __init__(self, lhs: Sequence[str], rhs: Sequence[str], weight: float = 1.0):
        super().__init__(weight)
        self.lhs, self.rhs = tuple(lhs), tuple(rhs)
        if not self.lhs or not self.rhs:
            raise ValueError("FD sides must be nonempty")
        if set(self.lhs) & set(self.rhs):
            raise ValueError("FD sides must be disjoint")

    def attrs(self) -> tuple[str, ...]:
        return self.lhs + self.rhs

    def describe(self) -> dict:
        return {"kind": self.kind, "lhs": list(self.lhs), "rhs": list(self.rhs), "weight": self.weight}

    def _keys(self, rel: Relation):
        lcols = [rel.column(a) for a in self.lhs]
        rcols = [rel.column(a) for a in self.rhs]
        return lcols, rcols

    def _state(self, rel: Relation) -> _FdState:
        def build() -> _FdState:
            st = _FdState()
            lcols, rcols = self._keys(rel)
            pairs: dict = {}
            for g, v in zip(zip(*lcols), zip(*rcols)):
                pairs[(g, v)] = pairs.get((g, v), 0) + 1
            n, sq = st.n, st.sq
            for (g, _), c in pairs.items():
                n[g] = n.get(g, 0) + c
                sq[g] = sq.get(g, 0) + c * c
            st.pairs = pairs
            st.total = sum(n[g] * n[g] - sq[g] for g in n)
            return st

        return rel.memo(self, build)

    def evaluate(self, rel: Relation) -> float:
        self.validate(rel.schema)
        return float(self._state(rel).total)

    def violating_groups(self, rel: Relation) -> list[tuple]:
        st = self._state(rel)
        return [g for g in st.n if st.n[g] * st.n[g] != st.sq[g]]

    def delta(self, base, base_value, deltas, result):
        rows = _touched(deltas, self.attrs())
        if not rows:
            return base_value
        st = self._state(base)
        bl, br = self._keys(base)
        rl, rr = self._keys(result)
        n_over: dict = {}
        sq_over: dict = {}
        pair_over: dict = {}
        old_groups = set()
        moves = []
        for rid in rows:
            pb, pr = base.position(rid), result.position(rid)
            og = tuple(c[pb] for c in bl)
            ov = tuple(c[pb] for c in br)
            ng = tuple(c[pr] for c in rl)
            nv = tuple(c[pr] for c in rr)
            if og == ng and ov == nv and all(
                values_equal(a, b) for a, b in zip(og + ov, ng + nv)
            ):
                continue
            moves.append((og, ov, ng, nv))
            old_groups.add(og)
            old_groups.add(ng)
        if not moves:
            return base_value

        def contrib(g):
            n = n_over.get(g, st.n.get(g, 0))
            return n * n - sq_over.get(g, st.sq.get(g, 0))

        removed = sum(contrib(g) for g in old_groups)

        def bump(g, v, step):
            c = pair_over.get((g, v), st.pairs.get((g, v), 0))
            # (c + step)^2 - c^2
            sq_over[g] = sq_over.get(g, st.sq.get(g, 0)) + 2 * c * step + 1
            n_over[g] = n_over.get(g, st.n.get(g, 0)) + step
            pair_over[(g, v)] = c + step

        for og, ov, ng, nv in moves:
            bump(og, ov, -1)
        for og, ov, ng, nv in moves:
            bump(ng, nv, +1)
        added = sum(contrib(g) for g in old_groups)
        return float(int(base_value) - removed + added)


# -- singleton values ----------------------------------------------------------


class SingletonCount(QualityTerm):
    """Number of distinct ``group_attr`` values (Null included) occurring exactly once."""

    kind = "singleton_count"

    def __init__(self, group_attr: str, weight: float = 1.0):
        super().__init__(weight)
        self.group_attr = group_attr

    def attrs(self) -> tuple[str, ...]:
        return (self.group_attr,)

    def describe(self) -> dict:
        return {"kind": self.kind, "group_attr": self.group_attr, "weight": self.weight}

    def _counts(self, rel: Relation) -> dict:
        def build() -> dict:
            counts: dict = {}
            for v in rel.column(self.group_attr):
                counts[v] = counts.get(v, 0) + 1
            return counts

        return rel.memo(self, build)

    def evaluate(self, rel: Relation) -> float:
        self.validate(rel.schema)
        return float(sum(1 for c in self._counts(rel).values() if c == 1))

    def delta(self, base, base_value, deltas, result):
        moves = [(d.old, d.new) for d in deltas if d.attr == self.group_attr]
        if not moves:
            return base_value
        counts = self._counts(base)
        over: dict = {}
        keys = {v for m in moves for v in m}
        before = sum(1 for k in keys if counts.get(k, 0) == 1)
        for old, new in moves:
            over[old] = over.get(old, counts.get(old, 0)) - 1
            over[new] = over.get(new, counts.get(new, 0)) + 1
        after = sum(1 for k in keys if over.get(k, counts.get(k, 0)) == 1)
        return float(int(base_value) - before + after)


# -- autoregressive smoothness ---------------------------------------------------


def ar1_window_error(ys: Sequence[Value]) -> float:
    """Mean absolute residual of a no-intercept AR(1) least-squares fit."""
    pairs = [(a, b) for a, b in zip(ys, ys[1:]) if a is not None and b is not None]
    if not pairs:
        return 0.0
    den = math.fsum(a * a for a, _ in pairs)
    coef = math.fsum(a * b for a, b in pairs) / den if den > 0 else 0.0
    return math.fsum(abs(b - coef * a) for a, b in pairs) / len(pairs)


class _ArState:
    __slots__ = ("order", "rank", "errors")


class ArWindowError(QualityTerm):
    """Average over sliding windows (stride 1, rows ordered by ``order_attr``) of AR(1) fit error."""

    kind = "ar_window_error"

    def __init__(self, value_attr: str, order_attr: str, window: int, weight: float = 1.0):
        super().__init__(weight)
        if int(window) < 2:
            raise ValueError("window must be >= 2")
        self.value_attr, self.order_attr, self.window = value_attr, order_attr, int(window)

    def attrs(self) -> tuple[str, ...]:
        return (self.value_attr, self.order_attr)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "value_attr": self.value_attr,
            "order_attr": self.order_attr,
            "window": self.window,
            "weight": self.weight,
        }

    def validate(self, schema: Schema) -> None:
        super().validate(schema)
        if schema.kind(self.value_attr) is not Kind.NUMBER:
            raise NonNumeric(f"{self.value_attr!r} is not a Number attribute")

    def _order(self, rel: Relation) -> list[int]:
        col = rel.column(self.order_attr)
        ids = rel.row_ids

        def key(p):
            v = col[p]
            return (v is None, v if v is not None else 0, ids[p])

        return sorted(range(len(rel)), key=key)

    def _state(self, rel: Relation) -> _ArState:
        def build() -> _ArState:
            st = _ArState()
            st.order = self._order(rel)
            st.rank = {p: i for i, p in enumerate(st.order)}
            vals = rel.column(self.value_attr)
            ys = [vals[p] for p in st.order]
            w = self.window
            st.errors = [ar1_window_error(ys[s : s + w]) for s in range(len(ys) - w + 1)]
            return st

        return rel.memo(self, build)

    def evaluate(self, rel: Relation) -> float:
        self.validate(rel.schema)
        errs = self._state(rel).errors
        return math.fsum(errs) / len(errs) if errs else 0.0

    def warning(self, rel: Relation) -> str | None:
        if len(rel) < self.window:
            return f"{self.kind}: {len(rel)} rows is fewer than window {self.window}; scored 0"
        return None

    def delta(self, base, base_value, deltas, result):
        if any(d.attr == self.order_attr for d in deltas):
            return None
        rows = _touched(deltas, (self.value_attr,))
        if not rows:
            return base_value
        st = self._state(base)
        if not st.errors:
            return 0.0
        w, nwin = self.window, len(st.errors)
        starts = set()
        for rid in rows:
            r = st.rank[base.position(rid)]
            starts.update(range(max(0, r - w + 1), min(r, nwin - 1) + 1))
        vals = result.column(self.value_attr)
        errs = list(st.errors)
        # positions are shared between base and result snapshots
        for s in starts:
            errs[s] = ar1_window_error([vals[p] for p in st.order[s : s + w]])
        return math.fsum(errs) / nwin


# -- edit distance from a baseline -------------------------------------------------


def cell_edit_cost(old: Value, new: Value, kind: Kind) -> float:
    if old is None and new is None:
        return 0.0
    if kind is Kind.TEXT:
        if old is None:
            return float(max(len(new), 1))
        if new is None:
            return float(max(len(old), 1))
        return float(levenshtein(old, new)) if old != new else 0.0
    if old is None:
        return abs(new)
    if new is None:
        return abs(old)
    return abs(old - new)


class EditCost(QualityTerm):
    """Sum of cell-wise edit costs against a baseline snapshot."""

    kind = "edit_cost"
    separability = CELL

    def __init__(self, baseline: Relation, weight: float = 1.0, attrs: Sequence[str] | None = None):
        super().__init__(weight)
        self.baseline = baseline
        self.only = tuple(attrs) if attrs else baseline.schema.names

    def attrs(self) -> tuple[str, ...]:
        return self.only

    def describe(self) -> dict:
        return {"kind": self.kind, "attrs": list(self.only), "weight": self.weight}

    def restricted(self, row_ids: Iterable[int]) -> "EditCost":
        return EditCost(self.baseline.restrict(row_ids), self.weight, self.only)

    def _costs(self, rel: Relation) -> dict[tuple[int, int], float]:
        def build() -> dict:
            base = self.baseline
            same_ids = tuple(rel.row_ids) == tuple(base.row_ids)
            out: dict = {}
            for a in self.only:
                ai = rel.schema.index(a)
                kind = rel.schema.attributes[ai].kind
                col, bcol = rel.column_at(ai), base.column(a)
                for p, v in enumerate(col):
                    b = bcol[p] if same_ids else bcol[base.position(rel.row_ids[p])]
                    if not values_equal(v, b):
                        out[(rel.row_ids[p], ai)] = cell_edit_cost(b, v, kind)
            return out

        return rel.memo(self, build)

    def evaluate(self, rel: Relation) -> float:
        self.validate(rel.schema)
        return math.fsum(self._costs(rel).values())

    def delta(self, base, base_value, deltas, result):
        names = set(self.only)
        costs = self._costs(base)
        over: dict = {}
        for d in deltas:
            if d.attr not in names:
                continue
            ai = result.schema.index(d.attr)
            b = self.baseline.value(d.row_id, d.attr)
            key = (d.row_id, ai)
            if values_equal(d.new, b):
                over[key] = 0.0
            else:
                over[key] = cell_edit_cost(b, d.new, result.schema.attributes[ai].kind)
        if not over:
            return base_value
        olds = [costs.get(k, 0.0) for k in over]
        news = list(over.values())
        if float(base_value).is_integer() and all(x.is_integer() for x in olds + news):
            return float(int(base_value) - int(sum(olds)) + int(sum(news)))
        merged = dict(costs)
        merged.update(over)
        return math.fsum(merged.values())


# -- dictionary membership (extension term) ---------------------------------------


class DictionaryViolations(QualityTerm):
    """Cells of ``attr`` (Null included) whose value is not a dictionary word."""

    kind = "dictionary_violations"
    separability = CELL

    def __init__(self, attr: str, words: Iterable[str], weight: float = 1.0):
        super().__init__(weight)
        self.attr = attr
        self.words = frozenset(words)

    def attrs(self) -> tuple[str, ...]:
        return (self.attr,)

    def describe(self) -> dict:
        return {"kind": self.kind, "attr": self.attr, "words": len(self.words), "weight": self.weight}

    def evaluate(self, rel: Relation) -> float:
        self.validate(rel.schema)
        words = self.words
        return float(sum(1 for v in rel.column(self.attr) if v not in words))

    def delta(self, base, base_value, deltas, result):
        words = self.words
        change = 0
        for d in deltas:
            if d.attr == self.attr:
                change += (d.new not in words) - (d.old not in words)
        return float(int(base_value) + change)


# -- specs and reports ------------------------------------------------------------


@dataclass(frozen=True)
class QualityReport:
    total_cost: float
    per_term: tuple[float, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


class QualitySpec:
    """Weighted list of quality terms; cost = sum of weight * term value."""

    def __init__(self, terms: Sequence[QualityTerm]):
        self.terms = tuple(terms)
        if not self.terms:
            raise ValueError("a quality spec needs at least one term")
        if all(t.weight == 0 for t in self.terms):
            raise ValueError("at least one term weight must be nonzero")

    def validate(self, schema: Schema) -> None:
        for t in self.terms:
            t.validate(schema)

    def restricted(self, row_ids: Iterable[int]) -> "QualitySpec":
        ids = list(row_ids)
        return QualitySpec([t.restricted(ids) for t in self.terms])

    def describe(self) -> list[dict]:
        return [t.describe() for t in self.terms]

    def __repr__(self) -> str:
        return f"QualitySpec({list(self.terms)!r})"


def eval_term(term: QualityTerm, rel: Relation) -> float:
    return term.evaluate(rel)


def _report(spec: QualitySpec, values: Sequence[float], warnings: Sequence[str]) -> QualityReport:
    total = 0.0
    for t, v in zip(spec.terms, values):
        total += t.weight * v
    return QualityReport(total, tuple(values), tuple(warnings))


def evaluate(spec: QualitySpec, rel: Relation) -> QualityReport:
    values, warnings = [], []
    for t in spec.terms:
        values.append(t.evaluate(rel))
        w = t.warning(rel)
        if w:
            warnings.append(w)
    return _report(spec, values, warnings)


def _spot_check(base: Relation, deltas: Sequence[CellDelta], result: Relation) -> None:
    if len(base) != len(result) or base.schema != result.schema:
        raise InconsistentDelta("result does not share shape with base")
    n = len(deltas)
    for i in sorted({0, n // 2, n - 1}):
        d = deltas[i]
        try:
            ok = values_equal(base.value(d.row_id, d.attr), d.old) and values_equal(
                result.value(d.row_id, d.attr), d.new
            )
        except (KeyError, UnknownAttribute):
            ok = False
        if not ok:
            raise InconsistentDelta(f"delta {d} is not reflected by base/result")


def eval_delta(
    spec: QualitySpec,
    base: Relation,
    base_report: QualityReport,
    deltas: Sequence[CellDelta],
    result: Relation,
) -> QualityReport:
    """Report for ``result`` derived from ``base_report`` and the cell deltas."""
    if not deltas:
        return base_report
    _spot_check(base, deltas, result)
    values, warnings = [], []
    for t, bv in zip(spec.terms, base_report.per_term):
        v = t.delta(base, bv, deltas, result)
        values.append(t.evaluate(result) if v is None else v)
        w = t.warning(result)
        if w:
            warnings.append(w)
    return _report(spec, values, warnings)


# -- blocking -----------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """Row partition cell searched independently.

    ``key`` is an ``(attrs, values)`` equality that selects exactly the
    block's rows on the relation it was derived from, when one exists.
    """

    row_ids: frozenset[int]
    origin: str
    key: tuple[tuple[str, ...], tuple[Value, ...]] | None = None


def derive_blocks(spec: QualitySpec, rel: Relation, user_key: str | None = None) -> list[Block]:
    ids = rel.row_ids
    if user_key is not None:
        groups: dict = {}
        for p, v in enumerate(rel.column(user_key)):
            groups.setdefault(v, []).append(ids[p])
        return [Block(frozenset(g), "user_key", ((user_key,), (v,))) for v, g in groups.items()]

    fds = [t for t in spec.terms if isinstance(t, FdViolations)]
    if fds:
        parent: dict[int, int] = {}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        group_keys: dict[int, tuple] = {}
        for t in fds:
            t.validate(rel.schema)
            bad = set(t.violating_groups(rel))
            lcols = [rel.column(a) for a in t.lhs]
            members: dict = {}
            for p in range(len(rel)):
                g = tuple(c[p] for c in lcols)
                if g in bad:
                    members.setdefault(g, []).append(ids[p])
            for g, rows in members.items():
                for r in rows:
                    parent.setdefault(r, r)
                root = find(rows[0])
                for r in rows[1:]:
                    rr = find(r)
                    if rr != root:
                        parent[rr] = root
                group_keys[rows[0]] = (t.lhs, g, len(rows))
        comps: dict[int, list[int]] = {}
        for r in parent:
            comps.setdefault(find(r), []).append(r)
        blocks = []
        for rows in sorted(comps.values(), key=min):
            key = None
            first = min(rows)
            if len(fds) == 1 and first in group_keys and group_keys[first][2] == len(rows):
                attrs, g, _ = group_keys[first]
                key = (attrs, g)
            blocks.append(Block(frozenset(rows), "fd", key))
        residual = frozenset(ids) - frozenset(parent)
        if residual:
            blocks.append(Block(residual, "residual"))
        return blocks

    if all(t.separability in (ROW, CELL) for t in spec.terms):
        return [Block(frozenset([r]), "row") for r in ids]
    return [Block(frozenset(ids), "all")]
