import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleanforge.operators import find_replace_candidates
from cleanforge.quality import EditCost, FdViolations, QualitySpec, SingletonCount, evaluate
from cleanforge.relation import Kind, Relation, hash_relation
from cleanforge.repair_ir import NOOP, Pipeline, apply_pipeline
from cleanforge.search import (
    ALL_RULES,
    NO_INVERSE,
    NO_REPEAT,
    BatchPool,
    Candidate,
    Engine,
    SearchConfig,
    count_language,
    expand,
    retain,
    search,
    static_prune,
)

from conftest import city_table, fr


def city_spec():
    return QualitySpec([FdViolations(["city_code"], ["city_name"]), SingletonCount("city_name")])


def units(cas):
    return [(c,) for c in cas]


def exhaustive_best(rel, spec, pool, k):
    """Minimum cost over every pipeline of at most k pool units."""
    best = evaluate(spec, rel).total_cost
    for n in range(1, k + 1):
        for combo in itertools.product(pool, repeat=n):
            out, _ = apply_pipeline([c for u in combo for c in u], rel)
            best = min(best, evaluate(spec, out).total_cost)
    return best


# -- static rules and counting -------------------------------------------------------


def test_static_prune_examples():
    ab, ba, cd = fr("v", "a", "b"), fr("v", "b", "a"), fr("v", "c", "d")
    p = Pipeline((ab,))
    assert static_prune(p, ab, {NO_REPEAT})
    assert static_prune(p, ba, {NO_INVERSE})
    assert not static_prune(p, cd, ALL_RULES)
    assert not static_prune(NOOP, ab, ALL_RULES)
    assert not static_prune(p, ab, set())


def test_count_language_examples():
    assert count_language(3, 3) == 27
    assert count_language(3, 3, {NO_REPEAT}) == 12
    assert count_language(61, 3) == 226_981


def brute_count(sigma, n, rules, inverse):
    ok = 0
    for w in itertools.product(range(sigma), repeat=n):
        bad = False
        for a, b in zip(w, w[1:]):
            if NO_REPEAT in rules and a == b:
                bad = True
            if NO_INVERSE in rules and inverse.get(a) == b:
                bad = True
        ok += not bad
    return ok


def test_count_language_brute_force_all_small():
    rng = random.Random(0)
    rule_sets = [set(), {NO_REPEAT}, {NO_INVERSE}, {NO_REPEAT, NO_INVERSE}]
    for sigma in range(1, 7):
        for n in range(0, 5):
            for _ in range(4):
                syms = list(range(sigma))
                rng.shuffle(syms)
                inverse = {}
                for a, b in zip(syms[::2], syms[1::2]):
                    if rng.random() < 0.7:
                        inverse[a], inverse[b] = b, a
                if syms and rng.random() < 0.3:
                    inverse[syms[-1]] = syms[-1]  # self-inverse symbol
                for rules in rule_sets:
                    assert count_language(sigma, n, rules, inverse) == brute_count(sigma, n, rules, inverse)


# -- retention -------------------------------------------------------------------------


def cand(cost, order):
    return Candidate(NOOP, cost, None, order, None, (order,))


def test_retain_examples():
    cs = [cand(4, 0), cand(6, 1), cand(10, 2)]
    assert [c.cost for c in retain(cs, 0.5, 10)] == [4, 6]
    assert [c.cost for c in retain(cs, 1.0, 10)] == [4]
    assert [c.cost for c in retain([cand(0, 0), cand(1, 1), cand(0, 2)], 0.5, 10)] == [0, 0]


def test_retain_cap_and_order():
    cs = [cand(5, 3), cand(4, 2), cand(4, 1), cand(5, 0)]
    assert [c.order for c in retain(cs, 0.5, 3)] == [(1,), (2,), (0,)]


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(gamma=0)
    with pytest.raises(ValueError):
        SearchConfig(max_depth=0)
    with pytest.raises(ValueError):
        SearchConfig(static_rules={"no_such"})


# -- expansion and search --------------------------------------------------------------


def test_expand_city_costs():
    rel, spec = city_table(), city_spec()
    pool = units(find_replace_candidates(rel, "city_name"))
    eng = Engine(rel, spec, SearchConfig())
    kids = expand([eng.root_candidate], pool, eng)
    costs = {(c.pipeline.steps[0].pred.clauses[0].value, c.pipeline.steps[0].value): c.cost for c in kids}
    assert costs[("New York", "New York City")] == 1.0
    assert costs[("New York City", "New York")] == 1.0
    assert all(v >= 2 for k, v in costs.items()
               if k not in {("New York", "New York City"), ("New York City", "New York")})


def test_expand_dedups_identical_results():
    rel = Relation.from_rows([("v", Kind.TEXT)], [("a",), ("b",)])
    spec = QualitySpec([SingletonCount("v")])
    pool = [(fr("v", "a", "b"),), (fr("v", "a", "b", op="other"), fr("v", "a", "b")), (fr("v", "b", "b"),)]
    eng = Engine(rel, spec, SearchConfig())
    kids = expand([eng.root_candidate], pool, eng)
    assert len(kids) == 1
    assert eng.pruned["duplicate"] == 1 and eng.pruned["no_noop"] == 1


def test_search_city_k1():
    rel = city_table()
    pool = units(find_replace_candidates(rel, "city_name"))
    out = search(rel, pool, city_spec(), SearchConfig(max_depth=1, gamma=1.0))
    assert out.best.cost == 1.0 == exhaustive_best(rel, city_spec(), pool, 1)
    assert len(out.best.pipeline) == 1
    step = out.best.pipeline.steps[0]
    assert (step.pred.clauses[0].value, step.value) == ("New York", "New York City")
    assert evaluate(QualitySpec([FdViolations(["city_code"], ["city_name"])]),
                    apply_pipeline(out.best.pipeline, rel)[0]).total_cost == 0


def test_search_city_k2_matches_exhaustive():
    rel = city_table()
    pool = units(find_replace_candidates(rel, "city_name"))
    out = search(rel, pool, city_spec(), SearchConfig(max_depth=2, gamma=1.0))
    # two renames collapse everything into one name: cost 0
    assert exhaustive_best(rel, city_spec(), pool, 2) == 0.0
    assert out.best.cost == 0.0


def test_search_clean_root():
    rel = Relation.from_rows([("v", Kind.TEXT)], [("a",), ("a",)])
    out = search(rel, units(find_replace_candidates(rel, "v")), QualitySpec([SingletonCount("v")]),
                 SearchConfig())
    assert out.best.pipeline == NOOP and out.expanded_count == 0


def test_search_zero_budget():
    rel = city_table()
    out = search(rel, units(find_replace_candidates(rel, "city_name")), city_spec(),
                 SearchConfig(time_budget_s=0))
    assert out.best.pipeline == NOOP and len(out.trace) == 1


def test_search_empty_pool_warns():
    out = search(city_table(), [], city_spec(), SearchConfig())
    assert out.best.pipeline == NOOP
    assert any("EmptyPool" in w for w in out.warnings)


def test_search_deterministic():
    rel = city_table()
    pool = units(find_replace_candidates(rel, "city_name"))
    a = search(rel, pool, city_spec(), SearchConfig(max_depth=3, gamma=0.5))
    b = search(rel, BatchPool(pool), city_spec(), SearchConfig(max_depth=3, gamma=0.5))
    assert a.best.pipeline == b.best.pipeline and a.expanded_count == b.expanded_count


def test_small_cache_still_sound():
    rel = city_table()
    pool = units(find_replace_candidates(rel, "city_name"))
    a = search(rel, pool, city_spec(), SearchConfig(max_depth=3, gamma=0.3, cache_size=1))
    b = search(rel, pool, city_spec(), SearchConfig(max_depth=3, gamma=0.3))
    assert a.best.pipeline == b.best.pipeline


# -- properties ------------------------------------------------------------------------

vals = st.sampled_from(["a", "b", "c", "ab"])
rows_st = st.lists(st.tuples(vals, st.sampled_from(["x", "y", "z"])), min_size=2, max_size=8)


def _setup(data):
    rel = Relation.from_rows([("v", Kind.TEXT), ("k", Kind.TEXT)], data)
    spec = QualitySpec([FdViolations(["k"], ["v"]), SingletonCount("v", 0.5), EditCost(rel, 0.1)])
    pool = units(find_replace_candidates(rel, "v"))
    return rel, spec, pool


@settings(max_examples=80, deadline=None)
@given(rows_st, st.sampled_from([0.3, 0.7, 1.0]), st.integers(1, 3), st.booleans())
def test_soundness_and_monotone_trace(data, gamma, k, merge):
    rel, spec, pool = _setup(data)
    out = search(rel, pool, spec, SearchConfig(gamma=gamma, max_depth=k, merge_enabled=merge))
    assert out.best.cost == evaluate(spec, apply_pipeline(out.best.pipeline, rel)[0]).total_cost
    costs = [t.best_cost for t in out.trace]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == out.best.cost
    assert out.best.depth <= k


@settings(max_examples=80, deadline=None)
@given(rows_st)
def test_k1_greedy_is_single_step_optimum(data):
    rel, spec, pool = _setup(data)
    out = search(rel, pool, spec, SearchConfig(gamma=1.0, max_depth=1))
    assert out.best.cost == exhaustive_best(rel, spec, pool, 1)


@settings(max_examples=60, deadline=None)
@given(rows_st, st.integers(1, 3))
def test_merge_never_worse(data, k):
    rel, spec, pool = _setup(data)
    plain = search(rel, pool, spec, SearchConfig(gamma=1.0, max_depth=k))
    merged = search(rel, pool, spec, SearchConfig(gamma=1.0, max_depth=k, merge_enabled=True))
    assert merged.best.cost <= plain.best.cost


@settings(max_examples=60, deadline=None)
@given(rows_st)
def test_dedup_keeps_a_representative(data):
    rel, spec, pool = _setup(data)
    eng = Engine(rel, spec, SearchConfig())
    kids = expand([eng.root_candidate], pool, eng)
    results = {}
    for (c,) in pool:
        out, d = apply_pipeline([c], rel)
        if d:
            results.setdefault(hash_relation(out), evaluate(spec, out).total_cost)
    assert sorted(results.values()) == sorted(k.cost for k in kids)
