import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleanforge.errors import InconsistentDelta, NonNumeric, UnknownAttribute
from cleanforge.quality import (
    ArWindowError,
    DictionaryViolations,
    EditCost,
    FdViolations,
    QualitySpec,
    SingletonCount,
    derive_blocks,
    eval_delta,
    eval_term,
    evaluate,
)
from cleanforge.relation import Kind, Relation, Schema
from cleanforge.repair_ir import (
    ConditionalAssignment,
    Predicate,
    RowIdEquals,
    apply_assignment,
    apply_pipeline,
)
from cleanforge.text import levenshtein

from conftest import city_table, fr


# -- oracles ------------------------------------------------------------------------


def fd_oracle(rel, lhs, rhs):
    rows = [rel.row(r) for r in rel.row_ids]
    li = [rel.schema.index(a) for a in lhs]
    ri = [rel.schema.index(a) for a in rhs]
    n = 0
    for i, a in enumerate(rows):
        for j, b in enumerate(rows):
            if i != j and all(a[k] == b[k] for k in li) and any(a[k] != b[k] for k in ri):
                n += 1
    return n


def singleton_oracle(rel, attr):
    return sum(1 for c in Counter(rel.column(attr)).values() if c == 1)


def ar_oracle(ys, window):
    """Exact rational arithmetic, rounded once at the end."""
    if len(ys) < window:
        return 0.0
    errs = []
    for s in range(len(ys) - window + 1):
        w = [Fraction(y) for y in ys[s:s + window]]
        pairs = list(zip(w, w[1:]))
        den = sum(a * a for a, _ in pairs)
        a_hat = sum(a * b for a, b in pairs) / den if den else Fraction(0)
        errs.append(sum(abs(b - a_hat * a) for a, b in pairs) / len(pairs))
    return float(sum(errs) / len(errs))


CITY_FD = FdViolations(["city_code"], ["city_name"])


def city_spec():
    return QualitySpec([CITY_FD, SingletonCount("city_name")])


# -- examples -----------------------------------------------------------------------


def test_fd_city_is_two():
    rel = city_table()
    assert eval_term(CITY_FD, rel) == 2 == fd_oracle(rel, ["city_code"], ["city_name"])


def test_singletons_city():
    assert eval_term(SingletonCount("city_name"), city_table()) == 3


def test_ar_exact_fit():
    rel = Relation.from_rows([("t", Kind.NUMBER), ("y", Kind.NUMBER)],
                             [(float(i), y) for i, y in enumerate([1.0, 2.0, 4.0, 8.0])])
    assert eval_term(ArWindowError("y", "t", 4), rel) == 0.0


def test_ar_short_series_warns():
    rel = Relation.from_rows([("t", Kind.NUMBER), ("y", Kind.NUMBER)], [(0.0, 1.0), (1.0, 3.0)])
    rep = evaluate(QualitySpec([ArWindowError("y", "t", 5)]), rel)
    assert rep.total_cost == 0.0 and rep.warnings


def test_ar_requires_number():
    with pytest.raises(NonNumeric):
        eval_term(ArWindowError("city_name", "city_code", 2), city_table())


def test_ar_matches_rational_oracle():
    rng = random.Random(3)
    ys = [float(rng.randint(-20, 20)) for _ in range(40)]
    rel = Relation.from_rows([("t", Kind.NUMBER), ("y", Kind.NUMBER)],
                             [(float(39 - i), y) for i, y in enumerate(reversed(ys))])
    got = eval_term(ArWindowError("y", "t", 6), rel)
    assert got == pytest.approx(ar_oracle(ys, 6), rel=1e-12)


def test_spec_totals_city():
    rel = city_table()
    assert evaluate(city_spec(), rel).total_cost == 5.0
    out, _ = apply_assignment(fr("city_name", "New York", "New York City"), rel)
    assert evaluate(city_spec(), out).total_cost == 1.0


def test_all_zero_weights_rejected():
    with pytest.raises(ValueError):
        QualitySpec([SingletonCount("city_name", weight=0.0)])
    with pytest.raises(ValueError):
        QualitySpec([])


def test_unknown_attr():
    with pytest.raises(UnknownAttribute):
        evaluate(QualitySpec([SingletonCount("zip")]), city_table())


def test_edit_cost_rules():
    base = Relation.from_rows([("s", Kind.TEXT), ("x", Kind.NUMBER)], [("abc", 1.0), (None, None)])
    now = Relation.from_rows([("s", Kind.TEXT), ("x", Kind.NUMBER)], [("abd", 4.5), ("", -2.0)])
    now2 = Relation.from_rows([("s", Kind.TEXT), ("x", Kind.NUMBER)], [(None, 1.0), ("hello", None)])
    t = EditCost(base)
    assert eval_term(t, base) == 0.0
    assert eval_term(t, now) == 1 + 3.5 + 1 + 2.0
    assert eval_term(t, now2) == 3 + 5


def test_dictionary_violations_counts_null():
    rel = Relation.from_rows([("w", Kind.TEXT)], [("cat",), ("cta",), (None,)])
    assert eval_term(DictionaryViolations("w", ["cat"]), rel) == 2


def test_delta_city_example():
    rel = city_table()
    spec = city_spec()
    base = evaluate(spec, rel)
    out, deltas = apply_assignment(fr("city_name", "New York", "New York City"), rel)
    rep = eval_delta(spec, rel, base, deltas, out)
    assert rep.total_cost == 1.0 == evaluate(spec, out).total_cost


def test_delta_empty_is_identity():
    rel = city_table()
    base = evaluate(city_spec(), rel)
    assert eval_delta(city_spec(), rel, base, [], rel) is base


def test_delta_inconsistent_detected():
    rel = city_table()
    base = evaluate(city_spec(), rel)
    _, deltas = apply_assignment(fr("city_name", "New York", "X"), rel)
    with pytest.raises(InconsistentDelta):
        eval_delta(city_spec(), rel, base, deltas, rel)


def _fd_table(n, groups, rng, names=6):
    rows = [(f"n{rng.randrange(names)}", f"c{rng.randrange(groups)}") for _ in range(n)]
    return Relation.from_rows([("city_name", Kind.TEXT), ("city_code", Kind.TEXT)], rows)


def test_delta_1000_single_edits_10k_rows():
    rng = random.Random(5)
    rel = _fd_table(10_000, 400, rng)
    spec = QualitySpec([CITY_FD, SingletonCount("city_name"), EditCost(rel, 0.5)])
    base = evaluate(spec, rel)
    for _ in range(1000):
        rid = rng.randrange(len(rel))
        attr = rng.choice(["city_name", "city_code"])
        val = (f"n{rng.randrange(8)}" if attr == "city_name" else f"c{rng.randrange(420)}")
        out, deltas = apply_assignment(ConditionalAssignment(Predicate(RowIdEquals(rid)), attr, val), rel)
        d = eval_delta(spec, rel, base, deltas, out)
        f = evaluate(spec, out)
        assert d.per_term == f.per_term and d.total_cost == f.total_cost


# -- properties ---------------------------------------------------------------------

SCHEMA = Schema([("k", Kind.TEXT), ("v", Kind.TEXT), ("t", Kind.NUMBER), ("y", Kind.NUMBER)])
small_text = st.sampled_from(["a", "b", "ab", None])
small_num = st.sampled_from([0.0, 1.0, 2.5, -3.0, 7.0, None])
rows_st = st.lists(st.tuples(small_text, small_text, small_num, small_num), min_size=1, max_size=14)
edit_st = st.tuples(st.integers(0, 13), st.sampled_from(["k", "v", "t", "y"]),
                    st.sampled_from(["a", "b", "ab", "abc", None]),
                    st.sampled_from([0.0, 1.0, 4.0, -1.5, None]))


def _spec_for(rel):
    return QualitySpec([
        FdViolations(["k"], ["v"]),
        FdViolations(["k", "t"], ["v", "y"], weight=0.5),
        SingletonCount("v", weight=2.0),
        ArWindowError("y", "t", 3, weight=1.5),
        EditCost(rel, weight=0.25),
        DictionaryViolations("k", ["a", "ab"], weight=0.75),
    ])


@settings(max_examples=250, deadline=None)
@given(rows_st, st.lists(edit_st, min_size=1, max_size=6))
def test_delta_equals_full_on_edit_streams(data, edits):
    rel = Relation.from_rows(SCHEMA, data)
    spec = _spec_for(rel)
    cur, rep = rel, evaluate(spec, rel)
    for rid, attr, tv, nv in edits:
        rid %= len(rel)
        val = nv if attr in ("t", "y") else tv
        out, deltas = apply_assignment(ConditionalAssignment(Predicate(RowIdEquals(rid)), attr, val), cur)
        d = eval_delta(spec, cur, rep, deltas, out)
        f = evaluate(spec, out)
        assert d.per_term == f.per_term
        assert d.total_cost == f.total_cost
        cur, rep = out, d


@settings(max_examples=150, deadline=None)
@given(rows_st)
def test_terms_match_oracles(data):
    rel = Relation.from_rows(SCHEMA, data)
    assert eval_term(FdViolations(["k"], ["v"]), rel) == fd_oracle(rel, ["k"], ["v"])
    assert eval_term(FdViolations(["k", "t"], ["v", "y"]), rel) == fd_oracle(rel, ["k", "t"], ["v", "y"])
    assert eval_term(SingletonCount("v"), rel) == singleton_oracle(rel, "v")
    rep = evaluate(_spec_for(rel), rel)
    assert all(math.isfinite(x) and x >= 0 for x in rep.per_term)
    assert rep.total_cost == pytest.approx(
        sum(t.weight * x for t, x in zip(_spec_for(rel).terms, rep.per_term)), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(rows_st, st.randoms(use_true_random=False))
def test_fd_and_singleton_relabel_invariant(data, rnd):
    rel = Relation.from_rows(SCHEMA, data)
    shuffled = list(data)
    rnd.shuffle(shuffled)
    ids = sorted(rnd.sample(range(1000), len(data)))
    other = Relation.from_rows(SCHEMA, shuffled, ids)
    for t in (FdViolations(["k"], ["v"]), SingletonCount("v")):
        assert eval_term(t, rel) == eval_term(t, other)
    perm = Schema([("v", Kind.TEXT), ("y", Kind.NUMBER), ("k", Kind.TEXT), ("t", Kind.NUMBER)])
    moved = Relation.from_rows(perm, [(v, y, k, t) for k, v, t, y in data])
    assert eval_term(FdViolations(["k"], ["v"]), rel) == eval_term(FdViolations(["k"], ["v"]), moved)


def test_zero_when_clean():
    rel = Relation.from_rows([("k", Kind.TEXT), ("v", Kind.TEXT)], [("a", "x"), ("a", "x"), ("b", "y")])
    assert eval_term(FdViolations(["k"], ["v"]), rel) == 0
    assert eval_term(EditCost(rel), rel) == 0


# -- blocks -------------------------------------------------------------------------


def test_blocks_fd():
    blocks = derive_blocks(QualitySpec([CITY_FD]), city_table())
    assert [sorted(b.row_ids) for b in blocks] == [[1, 2], [0]]
    assert blocks[0].key == (("city_code",), ("NY",))
    assert blocks[1].origin == "residual"


def test_blocks_user_key():
    blocks = derive_blocks(QualitySpec([CITY_FD]), city_table(), "city_code")
    assert sorted(sorted(b.row_ids) for b in blocks) == [[0], [1, 2]]


def test_blocks_edit_cost_per_row():
    rel = city_table()
    blocks = derive_blocks(QualitySpec([EditCost(rel)]), rel)
    assert sorted(sorted(b.row_ids) for b in blocks) == [[0], [1], [2]]


def test_blocks_singleton_whole():
    blocks = derive_blocks(QualitySpec([SingletonCount("city_name")]), city_table())
    assert len(blocks) == 1 and len(blocks[0].row_ids) == 3


@settings(max_examples=100, deadline=None)
@given(rows_st)
def test_blocks_partition(data):
    rel = Relation.from_rows(SCHEMA, data)
    spec = QualitySpec([FdViolations(["k"], ["v"]), FdViolations(["t"], ["y"])])
    blocks = derive_blocks(spec, rel)
    seen = [r for b in blocks for r in b.row_ids]
    assert sorted(seen) == list(rel.row_ids)


def test_edit_distance_backend_matches_dp():
    def dp(a, b):
        prev = list(range(len(b) + 1))
        for i, ca in enumerate(a, 1):
            cur = [i]
            for j, cb in enumerate(b, 1):
                cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
            prev = cur
        return prev[-1]

    rng = random.Random(2)
    for _ in range(500):
        a = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
        b = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
        assert levenshtein(a, b) == dp(a, b)
    assert levenshtein("New York", "New York City") == 5


def test_pipeline_cost_sound():
    rel = city_table()
    out, _ = apply_pipeline([fr("city_name", "New York City", "New York")], rel)
    assert evaluate(city_spec(), out).total_cost == 1.0
