"""Conditional assignments: the repair representation every operator emits.

A conditional assignment reads "for every row satisfying ``pred``, set
``target`` to ``value``".  Pipelines compose them left to right.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

from .errors import FormatError, TypeMismatch
from .relation import (
    CellDelta,
    CellRef,
    Kind,
    Relation,
    Schema,
    Value,
    check_value,
    hash_relation,
    normalize_number,
    values_equal,
)

# -- predicates ---------------------------------------------------------------


@dataclass(frozen=True)
class AttrEquals:
    attr: str
    value: Value

    def attrs(self) -> tuple[str, ...]:
        return (self.attr,)


@dataclass(frozen=True)
class TupleEquals:
    attr_names: tuple[str, ...]
    values: tuple[Value, ...]

    def __init__(self, attrs: Sequence[str], values: Sequence[Value]):
        object.__setattr__(self, "attr_names", tuple(attrs))
        object.__setattr__(self, "values", tuple(values))
        if len(self.attr_names) != len(self.values) or len(self.attr_names) < 2:
            raise ValueError("TupleEquals needs equal-length attrs/values of length >= 2")

    def attrs(self) -> tuple[str, ...]:
        return self.attr_names


_CMP_OPS: dict[str, Callable[[float, float], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class NumericCompare:
    attr: str
    op: str
    value: float

    def __post_init__(self):
        if self.op not in _CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def attrs(self) -> tuple[str, ...]:
        return (self.attr,)


@dataclass(frozen=True)
class Prefix:
    attr: str
    prefix: str

    def attrs(self) -> tuple[str, ...]:
        return (self.attr,)


@dataclass(frozen=True)
class RowIdEquals:
    row_id: int

    def attrs(self) -> tuple[str, ...]:
        return ()


Clause = Union[AttrEquals, TupleEquals, NumericCompare, Prefix, RowIdEquals]


@dataclass(frozen=True)
class Predicate:
    """Conjunction of clauses."""

    clauses: tuple[Clause, ...]

    def __init__(self, clauses: Iterable[Clause] | Clause):
        if not isinstance(clauses, (list, tuple)):
            clauses = (clauses,)
        object.__setattr__(self, "clauses", tuple(clauses))
        if not self.clauses:
            raise ValueError("a predicate needs at least one clause")

    def attrs(self) -> frozenset[str]:
        return frozenset(a for c in self.clauses for a in c.attrs())

    def __and__(self, other: "Predicate") -> "Predicate":
        return Predicate(self.clauses + other.clauses)


def validate_predicate(pred: Predicate, schema: Schema) -> None:
    for c in pred.clauses:
        if isinstance(c, AttrEquals):
            check_value(c.value, schema.kind(c.attr))
        elif isinstance(c, TupleEquals):
            for a, v in zip(c.attr_names, c.values):
                check_value(v, schema.kind(a))
        elif isinstance(c, NumericCompare):
            if schema.kind(c.attr) is not Kind.NUMBER:
                raise TypeMismatch(f"numeric comparison on Text attribute {c.attr!r}")
        elif isinstance(c, Prefix):
            if schema.kind(c.attr) is not Kind.TEXT:
                raise TypeMismatch(f"prefix test on Number attribute {c.attr!r}")


def _clause_test(c: Clause, rel: Relation) -> Callable[[int], bool]:
    if isinstance(c, AttrEquals):
        col, v = rel.column(c.attr), c.value
        return lambda p: values_equal(col[p], v)
    if isinstance(c, TupleEquals):
        pairs = [(rel.column(a), v) for a, v in zip(c.attr_names, c.values)]
        return lambda p: all(values_equal(col[p], v) for col, v in pairs)
    if isinstance(c, NumericCompare):
        col, op, v = rel.column(c.attr), _CMP_OPS[c.op], c.value
        return lambda p: col[p] is not None and op(col[p], v)
    if isinstance(c, Prefix):
        col, s = rel.column(c.attr), c.prefix
        return lambda p: col[p] is not None and col[p].startswith(s)
    ids = rel.row_ids
    rid = c.row_id
    return lambda p: ids[p] == rid


def matching_positions(pred: Predicate, rel: Relation) -> list[int]:
    """Positions (not row ids) of rows satisfying ``pred``, ascending."""
    seed: list[int] | None = None
    seed_clause = None
    for c in pred.clauses:
        if isinstance(c, RowIdEquals):
            seed = [rel.position(c.row_id)] if rel.has_row(c.row_id) else []
            seed_clause = c
            break
    if seed is None:
        for c in pred.clauses:
            if isinstance(c, AttrEquals):
                seed, seed_clause = rel.index(c.attr).get(c.value, []), c
                break
            if isinstance(c, TupleEquals) and seed is None:
                seed, seed_clause = rel.index(c.attr_names[0]).get(c.values[0], []), None
    if seed is None:
        seed = range(len(rel))  # type: ignore[assignment]
    tests = [_clause_test(c, rel) for c in pred.clauses if c is not seed_clause]
    if not tests:
        return list(seed)
    return [p for p in seed if all(t(p) for t in tests)]


def eval_predicate(pred: Predicate, rel: Relation, row_id: int) -> bool:
    for c in pred.clauses:
        for a in c.attrs():
            rel.schema.index(a)
    p = rel.position(row_id)
    return all(_clause_test(c, rel)(p) for c in pred.clauses)


# -- assignments --------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    operator: str
    params_digest: str = ""
    numeric_params: tuple[float, ...] = ()


MANUAL = Provenance("manual")


@dataclass(frozen=True)
class ConditionalAssignment:
    """``if pred(r): r[target] = value``.

    Provenance is carried along but ignored by equality and hashing, so
    the same repair proposed by two operators compares equal.
    """

    pred: Predicate
    target: str
    value: Value
    provenance: Provenance = field(default=MANUAL, compare=False)

    def __str__(self) -> str:
        return f"ca({_pred_str(self.pred)}, {self.target}, {self.value!r})"


def _clause_str(c: Clause) -> str:
    if isinstance(c, AttrEquals):
        return f"{c.attr} == {c.value!r}"
    if isinstance(c, TupleEquals):
        return f"[{', '.join(c.attr_names)}] == {c.values!r}"
    if isinstance(c, NumericCompare):
        return f"{c.attr} {c.op} {c.value!r}"
    if isinstance(c, Prefix):
        return f"{c.attr}.prefix({c.prefix!r})"
    return f"row_id == {c.row_id}"


def _pred_str(p: Predicate) -> str:
    return " AND ".join(_clause_str(c) for c in p.clauses)


def validate_assignment(ca: ConditionalAssignment, schema: Schema) -> None:
    validate_predicate(ca.pred, schema)
    check_value(ca.value, schema.kind(ca.target))


def apply_assignment(ca: ConditionalAssignment, rel: Relation) -> tuple[Relation, list[CellDelta]]:
    validate_assignment(ca, rel.schema)
    ti = rel.schema.index(ca.target)
    col = rel.column_at(ti)
    v = ca.value
    changed = {p: v for p in matching_positions(ca.pred, rel) if not values_equal(col[p], v)}
    if not changed:
        return rel, []
    ref = ca.target
    deltas = [CellDelta(CellRef(rel.row_ids[p], ref), col[p], v) for p in sorted(changed)]
    return rel.with_updates({ti: changed}), deltas


def changes_anything(ca: ConditionalAssignment, rel: Relation) -> bool:
    col = rel.column(ca.target)
    return any(not values_equal(col[p], ca.value) for p in matching_positions(ca.pred, rel))


# -- pipelines ----------------------------------------------------------------


@dataclass(frozen=True)
class Pipeline:
    """Ordered composition; ``steps[0]`` runs first.

    ``unit_sizes`` records how steps group into atomic search units (a
    coarse unit holds several steps); it does not affect semantics.
    """

    steps: tuple[ConditionalAssignment, ...] = ()
    unit_sizes: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.unit_sizes is not None and sum(self.unit_sizes) != len(self.steps):
            raise ValueError("unit_sizes do not cover the steps")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def units(self) -> tuple[tuple[ConditionalAssignment, ...], ...]:
        sizes = self.unit_sizes if self.unit_sizes is not None else (1,) * len(self.steps)
        out, i = [], 0
        for n in sizes:
            out.append(self.steps[i : i + n])
            i += n
        return tuple(out)

    @property
    def depth(self) -> int:
        return len(self.unit_sizes) if self.unit_sizes is not None else len(self.steps)

    def extend(self, unit: Sequence[ConditionalAssignment]) -> "Pipeline":
        sizes = self.unit_sizes if self.unit_sizes is not None else (1,) * len(self.steps)
        return Pipeline(self.steps + tuple(unit), sizes + (len(unit),))

    @classmethod
    def from_units(cls, units: Iterable[Sequence[ConditionalAssignment]]) -> "Pipeline":
        units = [tuple(u) for u in units]
        return cls(tuple(c for u in units for c in u), tuple(len(u) for u in units))


NOOP = Pipeline(())


def apply_pipeline(
    p: Pipeline | Sequence[ConditionalAssignment], rel: Relation
) -> tuple[Relation, list[CellDelta]]:
    """Apply steps in order; deltas are net changes against ``rel``."""
    steps = p.steps if isinstance(p, Pipeline) else tuple(p)
    if len(steps) == 1:
        return apply_assignment(steps[0], rel)
    original: dict[tuple[int, int], Value] = {}
    cur = rel
    for ca in steps:
        nxt, ds = apply_assignment(ca, cur)
        if ds:
            ti = rel.schema.index(ca.target)
            for d in ds:
                original.setdefault((rel.position(d.row_id), ti), d.old)
        cur = nxt
    net = []
    for (p_, ai), old in sorted(original.items()):
        new = cur.column_at(ai)[p_]
        if not values_equal(old, new):
            net.append(CellDelta(CellRef(rel.row_ids[p_], rel.schema.attributes[ai].name), old, new))
    return cur, net


# -- conflict analysis --------------------------------------------------------


def _equalities(pred: Predicate) -> dict[str, list[Value]]:
    eqs: dict[str, list[Value]] = {}
    for c in pred.clauses:
        if isinstance(c, AttrEquals):
            eqs.setdefault(c.attr, []).append(c.value)
        elif isinstance(c, TupleEquals):
            for a, v in zip(c.attr_names, c.values):
                eqs.setdefault(a, []).append(v)
    return eqs


def _range_empty(cmps: list[NumericCompare]) -> bool:
    lo, lo_inc = -math.inf, True
    hi, hi_inc = math.inf, True
    for c in cmps:
        if c.op in (">", ">="):
            inc = c.op == ">="
            if c.value > lo or (c.value == lo and not inc):
                lo, lo_inc = c.value, inc
        else:
            inc = c.op == "<="
            if c.value < hi or (c.value == hi and not inc):
                hi, hi_inc = c.value, inc
    if lo > hi:
        return True
    return lo == hi and not (lo_inc and hi_inc)


def predicates_disjoint(p1: Predicate, p2: Predicate) -> bool:
    """Conservative: ``True`` only if no row can satisfy both predicates."""
    e1, e2 = _equalities(p1), _equalities(p2)
    for a in e1.keys() & e2.keys():
        if any(not values_equal(x, y) for x in e1[a] for y in e2[a]):
            return True
    ids1 = {c.row_id for c in p1.clauses if isinstance(c, RowIdEquals)}
    ids2 = {c.row_id for c in p2.clauses if isinstance(c, RowIdEquals)}
    if ids1 and ids2 and (len(ids1 | ids2) > 1):
        return True
    cmps: dict[str, tuple[list[NumericCompare], list[NumericCompare]]] = {}
    for i, p in enumerate((p1, p2)):
        for c in p.clauses:
            if isinstance(c, NumericCompare):
                cmps.setdefault(c.attr, ([], []))[i].append(c)
    for a, (c1, c2) in cmps.items():
        if c1 and c2 and _range_empty(c1 + c2):
            return True
    for eqs, other in ((e1, p2), (e2, p1)):
        for c in other.clauses:
            if isinstance(c, Prefix) and c.attr in eqs:
                for v in eqs[c.attr]:
                    if not (isinstance(v, str) and v.startswith(c.prefix)):
                        return True
    return False


def commutes(c1: ConditionalAssignment, c2: ConditionalAssignment) -> bool:
    """Conservative order-independence test (no false positives)."""
    if c1.target in c2.pred.attrs() or c2.target in c1.pred.attrs():
        return False
    return predicates_disjoint(c1.pred, c2.pred)


def is_literal_inverse(prev: ConditionalAssignment, new: ConditionalAssignment) -> bool:
    """``new`` swaps the find/replace constants of a find-replace style ``prev``."""
    if len(prev.pred.clauses) != 1 or len(new.pred.clauses) != 1:
        return False
    a, b = prev.pred.clauses[0], new.pred.clauses[0]
    if not (isinstance(a, AttrEquals) and isinstance(b, AttrEquals)):
        return False
    return (
        a.attr == b.attr == prev.target == new.target
        and values_equal(a.value, new.value)
        and values_equal(b.value, prev.value)
    )


def _common_unit_prefix(a: Pipeline, b: Pipeline) -> int:
    n = 0
    for ua, ub in zip(a.units, b.units):
        if ua != ub:
            break
        n += 1
    return n


def merge_disjoint(
    frontier: Sequence[Pipeline],
    rel: Relation,
    quality,
    cost_of: Callable[[Pipeline], float] | None = None,
    hash_of: Callable[[Pipeline], int] | None = None,
) -> list[Pipeline]:
    """Greedily fold commuting, cost-improving pipelines into each other.

    For every pipeline the others are tried in order; another pipeline's
    units beyond the shared prefix are appended when every appended step
    commutes with every non-shared step already present, and the merged
    cost is strictly below the accumulated cost and no worse than the
    other pipeline's cost.  Output is deduplicated by result hash.
    """
    from .quality import evaluate

    if cost_of is None:
        cache: dict[tuple, float] = {}

        def cost_of(p: Pipeline) -> float:
            if p.steps not in cache:
                cache[p.steps] = evaluate(quality, apply_pipeline(p, rel)[0]).total_cost
            return cache[p.steps]

    if hash_of is None:

        def hash_of(p: Pipeline) -> int:
            return hash_relation(apply_pipeline(p, rel)[0])

    costs = [cost_of(p) for p in frontier]
    merged: list[Pipeline] = []
    for i, s in enumerate(frontier):
        acc, acc_cost = s, costs[i]
        for j, other in enumerate(frontier):
            if i == j:
                continue
            k = _common_unit_prefix(acc, other)
            mine = [c for u in acc.units[k:] for c in u]
            extra_units = other.units[k:]
            extra = [c for u in extra_units for c in u]
            if not mine or not extra:
                continue
            if not all(commutes(a, b) for a in mine for b in extra):
                continue
            m = Pipeline.from_units(acc.units + extra_units)
            mc = cost_of(m)
            if mc < acc_cost and mc <= costs[j]:
                acc, acc_cost = m, mc
        merged.append(acc)
    out, seen = [], set()
    for p in merged:
        h = hash_of(p)
        if h not in seen:
            seen.add(h)
            out.append(p)
    return out


# -- serialization ------------------------------------------------------------


def _clause_to_json(c: Clause) -> dict:
    if isinstance(c, AttrEquals):
        return {"kind": "attr_eq", "attr": c.attr, "value": c.value}
    if isinstance(c, TupleEquals):
        return {"kind": "tuple_eq", "attrs": list(c.attr_names), "values": list(c.values)}
    if isinstance(c, NumericCompare):
        return {"kind": "cmp", "attr": c.attr, "op": c.op, "value": c.value}
    if isinstance(c, Prefix):
        return {"kind": "prefix", "attr": c.attr, "value": c.prefix}
    return {"kind": "row_id", "row_id": c.row_id}


def pipeline_to_dict(p: Pipeline) -> dict:
    steps = []
    for ca in p.steps:
        steps.append(
            {
                "pred": {"clauses": [_clause_to_json(c) for c in ca.pred.clauses]},
                "target": ca.target,
                "value": ca.value,
                "provenance": {
                    "operator": ca.provenance.operator,
                    "params_digest": ca.provenance.params_digest,
                    "numeric_params": list(ca.provenance.numeric_params),
                },
            }
        )
    return {"steps": steps}


def serialize_pipeline(p: Pipeline, indent: int | None = None) -> str:
    return json.dumps(pipeline_to_dict(p), indent=indent, ensure_ascii=False, allow_nan=False)


def _obj(x, ptr: str, required: set[str], optional: set[str] = frozenset()) -> dict:
    if not isinstance(x, dict):
        raise FormatError("expected an object", ptr)
    for k in x:
        if k not in required and k not in optional:
            raise FormatError(f"unknown key {k!r}", f"{ptr}/{k}")
    for k in required:
        if k not in x:
            raise FormatError(f"missing key {k!r}", f"{ptr}/{k}")
    return x


def _str(x, ptr: str) -> str:
    if not isinstance(x, str):
        raise FormatError("expected a string", ptr)
    return x


def _list(x, ptr: str) -> list:
    if not isinstance(x, list):
        raise FormatError("expected an array", ptr)
    return x


def _value(x, ptr: str) -> Value:
    if x is None or isinstance(x, str):
        return x
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FormatError("expected null, string or number", ptr)
    return normalize_number(x)


def _number(x, ptr: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FormatError("expected a number", ptr)
    return float(x)


def _clause_from_json(x, ptr: str) -> Clause:
    if not isinstance(x, dict):
        raise FormatError("expected an object", ptr)
    kind = x.get("kind")
    if kind == "attr_eq":
        _obj(x, ptr, {"kind", "attr", "value"})
        return AttrEquals(_str(x["attr"], ptr + "/attr"), _value(x["value"], ptr + "/value"))
    if kind == "tuple_eq":
        _obj(x, ptr, {"kind", "attrs", "values"})
        attrs = [_str(a, f"{ptr}/attrs/{i}") for i, a in enumerate(_list(x["attrs"], ptr + "/attrs"))]
        vals = [_value(v, f"{ptr}/values/{i}") for i, v in enumerate(_list(x["values"], ptr + "/values"))]
        if len(attrs) != len(vals) or len(attrs) < 2:
            raise FormatError("attrs and values must have equal length >= 2", ptr)
        return TupleEquals(attrs, vals)
    if kind == "cmp":
        _obj(x, ptr, {"kind", "attr", "op", "value"})
        op = _str(x["op"], ptr + "/op")
        if op not in _CMP_OPS:
            raise FormatError(f"unknown comparison {op!r}", ptr + "/op")
        return NumericCompare(_str(x["attr"], ptr + "/attr"), op, _number(x["value"], ptr + "/value"))
    if kind == "prefix":
        _obj(x, ptr, {"kind", "attr", "value"})
        return Prefix(_str(x["attr"], ptr + "/attr"), _str(x["value"], ptr + "/value"))
    if kind == "row_id":
        _obj(x, ptr, {"kind", "row_id"})
        rid = x["row_id"]
        if isinstance(rid, bool) or not isinstance(rid, int):
            raise FormatError("expected an integer", ptr + "/row_id")
        return RowIdEquals(rid)
    raise FormatError(f"unknown clause kind {kind!r}", ptr + "/kind")


def pipeline_from_dict(doc) -> Pipeline:
    _obj(doc, "", {"steps"})
    steps = []
    for i, s in enumerate(_list(doc["steps"], "/steps")):
        ptr = f"/steps/{i}"
        _obj(s, ptr, {"pred", "target", "value"}, {"provenance"})
        pred = _obj(s["pred"], ptr + "/pred", {"clauses"})
        clauses = _list(pred["clauses"], ptr + "/pred/clauses")
        if not clauses:
            raise FormatError("a predicate needs at least one clause", ptr + "/pred/clauses")
        parsed = [_clause_from_json(c, f"{ptr}/pred/clauses/{j}") for j, c in enumerate(clauses)]
        prov = MANUAL
        if "provenance" in s:
            pp = ptr + "/provenance"
            pv = _obj(s["provenance"], pp, {"operator"}, {"params_digest", "numeric_params"})
            nums = _list(pv.get("numeric_params", []), pp + "/numeric_params")
            prov = Provenance(
                _str(pv["operator"], pp + "/operator"),
                _str(pv.get("params_digest", ""), pp + "/params_digest"),
                tuple(_number(n, f"{pp}/numeric_params/{k}") for k, n in enumerate(nums)),
            )
        steps.append(
            ConditionalAssignment(
                Predicate(parsed), _str(s["target"], ptr + "/target"), _value(s["value"], ptr + "/value"), prov
            )
        )
    return Pipeline(tuple(steps))


def deserialize_pipeline(text: str) -> Pipeline:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg} at char {exc.pos}") from exc
    return pipeline_from_dict(doc)


def check_pipeline(p: Pipeline, schema: Schema) -> None:
    """Raise if any step references attributes or kinds ``schema`` lacks."""
    for ca in p.steps:
        validate_assignment(ca, schema)
