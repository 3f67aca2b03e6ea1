"""Execution runtime: repair pool, async generation, blocked and parallel search."""

from __future__ import annotations

import queue
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .errors import PoolClosed, WorkerPanic
from .operators import Operator, coarsen, collect_all
from .prune_learn import FeatureSpace, PruningModel, TrainingSet, train_or_disable
from .quality import Block, QualitySpec, derive_blocks, eval_delta, evaluate
from .relation import Relation, hash_relation
from .repair_ir import (
    AttrEquals,
    ConditionalAssignment,
    Pipeline,
    Predicate,
    Provenance,
    RowIdEquals,
    TupleEquals,
    apply_pipeline,
)
from .search import (
    BatchPool,
    Candidate,
    Engine,
    SearchConfig,
    SearchOutcome,
    TracePoint,
    Unit,
    retain,
    search,
)

DEFAULT_CAPACITY = 10_000
ACCEPTED = "accepted"


# -- repair pool --------------------------------------------------------------------


class RepairPool:
    """Bounded multi-producer queue of CA-units; producers block while it is full."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._q: deque[tuple[str | None, Unit]] = deque()
        self._cv = threading.Condition()
        self._closed = False
        self._sealed = False
        self._producers: set[str] = set()
        self.first_emission: dict[str, float] = {}
        self.offered = 0
        self.drained = 0
        self.peak = 0

    def __len__(self) -> int:
        with self._cv:
            return len(self._q)

    def register(self, producer: str) -> None:
        with self._cv:
            self._producers.add(producer)

    def done(self, producer: str) -> None:
        with self._cv:
            self._producers.discard(producer)
            self._cv.notify_all()

    def seal(self) -> None:
        """No further producers will register."""
        with self._cv:
            self._sealed = True
            self._cv.notify_all()

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._cv.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed

    def offer(self, unit: Sequence[ConditionalAssignment], producer: str | None = None,
              timeout: float | None = None) -> str:
        """Enqueue, blocking while full.  Returns ``"accepted"`` or ``"blocked"`` on timeout."""
        with self._cv:
            if self._closed:
                raise PoolClosed("pool is closed")
            if not self._cv.wait_for(lambda: self._closed or len(self._q) < self.capacity, timeout):
                return "blocked"
            if self._closed:
                raise PoolClosed("pool is closed")
            self._q.append((producer, tuple(unit)))
            self.offered += 1
            self.peak = max(self.peak, len(self._q))
            if producer is not None and producer not in self.first_emission:
                self.first_emission[producer] = time.perf_counter()
            self._cv.notify_all()
            return ACCEPTED

    def try_offer(self, unit, producer: str | None = None) -> str:
        return self.offer(unit, producer, timeout=0)

    def drain(self, limit: int | None = None) -> list[Unit]:
        with self._cv:
            n = len(self._q) if limit is None else min(limit, len(self._q))
            out = [self._q.popleft()[1] for _ in range(n)]
            self.drained += n
            if n:
                self._cv.notify_all()
            return out

    @property
    def exhausted(self) -> bool:
        with self._cv:
            return (self._sealed or self._closed) and not self._producers and not self._q

    def wait(self, timeout: float) -> None:
        with self._cv:
            self._cv.wait_for(
                lambda: self._q or ((self._sealed or self._closed) and not self._producers),
                timeout,
            )


# -- async generation ----------------------------------------------------------------


def _generator(op: Operator, rel: Relation, pool: RepairPool, mode: str, delay: float,
               sweep: str, seed: int, errors: list) -> None:
    try:
        for setting in op.settings(sweep, seed):
            if pool.closed:
                return
            if delay:
                time.sleep(delay)
            for unit in coarsen(op.collect(rel, setting), mode):
                pool.offer(unit, op.operator_id)
    except PoolClosed:
        pass
    except Exception as exc:  # a failing operator must not take the search down
        errors.append(f"operator {op.operator_id} failed: {exc!r}")
    finally:
        pool.done(op.operator_id)


def run_async(
    root: Relation,
    spec: QualitySpec,
    operators: Sequence[Operator],
    cfg: SearchConfig,
    capacity: int = DEFAULT_CAPACITY,
    coarsen_mode: str = "fine",
    delays: dict[str, float] | None = None,
    sweep: str = "restrictive",
    model: PruningModel | None = None,
) -> SearchOutcome:
    """One generator thread per operator feeding the pool; the searcher drains it each round."""
    if not operators:
        raise ValueError("run_async needs at least one operator")
    delays = delays or {}
    pool = RepairPool(capacity)
    errors: list[str] = []
    start = time.perf_counter()
    threads = []
    for op in operators:
        pool.register(op.operator_id)
        t = threading.Thread(
            target=_generator,
            args=(op, root, pool, coarsen_mode, delays.get(op.operator_id, 0.0), sweep,
                  cfg.seed, errors),
            name=f"gen-{op.operator_id}",
            daemon=True,
        )
        threads.append(t)
    pool.seal()
    for t in threads:
        t.start()
    try:
        outcome = search(root, pool, spec, cfg, model, start=start)
    finally:
        pool.close()
    for t in threads:
        t.join(timeout=1.0)
    for op_id, ts in sorted(pool.first_emission.items(), key=lambda kv: kv[1]):
        outcome.events.append(("first_emission", op_id, ts - start))
    outcome.warnings.extend(errors)
    return outcome


# -- blocked search ----------------------------------------------------------------


@dataclass
class BlockReport:
    block: Block
    searched: bool
    cost_before: float
    cost_after: float
    expanded: int
    pool_size: int
    learned: bool
    scoping: str = ""


def _scope(steps: Sequence[ConditionalAssignment], block: Block,
           writes: set[str]) -> list[ConditionalAssignment] | None:
    if block.key is not None and not writes & set(block.key[0]):
        attrs, vals = block.key
        clause = AttrEquals(attrs[0], vals[0]) if len(attrs) == 1 else TupleEquals(attrs, vals)
    elif len(block.row_ids) == 1:
        clause = RowIdEquals(next(iter(block.row_ids)))
    else:
        return None
    return [
        c if clause in c.pred.clauses else replace(c, pred=Predicate((clause,) + tuple(c.pred.clauses)))
        for c in steps
    ]


def _pin_cells(deltas, prov: Provenance) -> list[ConditionalAssignment]:
    return [
        ConditionalAssignment(Predicate(RowIdEquals(d.row_id)), d.attr, d.new, prov)
        for d in deltas
    ]


def max_numeric_params(operators: Iterable[Operator]) -> int:
    from .operators import Threshold

    best = 0
    for op in operators:
        n = sum(1 for _, d in op.spec.domains if isinstance(d, Threshold))
        n += sum(1 for _, d in op.spec.domains if not isinstance(d, Threshold)
                 and all(isinstance(v, float) for v in d.values()))
        best = max(best, n)
    return best


def run_blocked(
    root: Relation,
    spec: QualitySpec,
    operators: Sequence[Operator],
    cfg: SearchConfig,
    user_key: str | None = None,
    min_blocks: int = 3,
    learn: bool | None = None,
    coarsen_mode: str = "fine",
    epochs: int = 200,
    rate: float = 0.1,
) -> tuple[SearchOutcome, TrainingSet]:
    """Search each block on its own rows and concatenate the block pipelines.

    After ``min_blocks`` searched blocks, a pruning model trained on the
    blocks so far filters the extensions of every later block (retrained
    at each block boundary).
    """
    learn = cfg.learn_enabled if learn is None else learn
    start = time.perf_counter()
    blocks = derive_blocks(spec, root, user_key)
    space = FeatureSpace.build(root.schema, [op.operator_id for op in operators],
                               max_numeric_params(operators))
    ts = TrainingSet()
    cur = root
    cur_report = evaluate(spec, root)
    units_all: list[Unit] = []
    trace = [TracePoint(0.0, cur_report.total_cost, 0, Pipeline())]
    expanded, searched = 0, 0
    pruned: dict[str, int] = {}
    reports: list[BlockReport] = []
    model: PruningModel | None = None
    sub_cfg = replace(cfg, learn_enabled=False)
    for block in blocks:
        if time.perf_counter() - start >= cfg.time_budget_s:
            break
        ids = sorted(block.row_ids)
        sub = root.restrict(ids)
        sub_spec = spec.restricted(ids)
        sub_report = evaluate(sub_spec, sub)
        if sub_report.total_cost == 0:
            reports.append(BlockReport(block, False, 0.0, 0.0, 0, 0, False))
            continue
        pooled = collect_all(sub, operators, seed=cfg.seed)
        seen_cas: dict[ConditionalAssignment, None] = {}
        for ca in pooled:
            seen_cas.setdefault(ca, None)
        units = coarsen(list(seen_cas), coarsen_mode)
        use_model = learn and searched >= min_blocks
        if use_model:
            model = train_or_disable(ts, space, epochs=epochs, rate=rate, seed=cfg.seed)
        bcfg = replace(sub_cfg, learn_enabled=use_model,
                       time_budget_s=max(0.0, cfg.time_budget_s - (time.perf_counter() - start)))
        out = search(sub, BatchPool(units), sub_spec, bcfg, model if use_model else None)
        searched += 1
        expanded += out.expanded_count
        for k, v in out.pruned_counts.items():
            pruned[k] = pruned.get(k, 0) + v
        ts.add_block(space, pooled, out.best.pipeline)
        rep = BlockReport(block, True, sub_report.total_cost, out.best.cost, out.expanded_count,
                          len(units), use_model)
        reports.append(rep)
        if not out.best.pipeline.steps:
            continue
        local_result, local_deltas = apply_pipeline(out.best.pipeline, sub)
        block_units = _scoped_units(out.best.pipeline, block, cur, local_deltas)
        rep.scoping = block_units[1]
        steps = [c for u in block_units[0] for c in u]
        nxt, deltas = apply_pipeline(steps, cur)
        nxt_report = eval_delta(spec, cur, cur_report, deltas, nxt)
        if nxt_report.total_cost > cur_report.total_cost:
            rep.scoping += ",rejected"
            continue
        units_all.extend(block_units[0])
        cur, cur_report = nxt, nxt_report
        if nxt_report.total_cost < trace[-1].best_cost:
            trace.append(TracePoint(time.perf_counter() - start, cur_report.total_cost, expanded,
                                    Pipeline.from_units(units_all)))
    final = Pipeline.from_units(units_all)
    result, _ = apply_pipeline(final, root)
    report = evaluate(spec, result)
    best = Candidate(final, report.total_cost, report, hash_relation(result), result)
    outcome = SearchOutcome(best, expanded, pruned, trace, searched, len(units_all),
                            events=[("block", r) for r in reports])
    return outcome, ts


def _scoped_units(p: Pipeline, block: Block, cur: Relation, local_deltas) -> tuple[list[Unit], str]:
    """Units equivalent to ``p`` on the block's rows that leave every other row alone."""
    want = {(d.row_id, d.attr): d.new for d in local_deltas}
    writes = {c.target for c in p.steps}
    scoped = [_scope(u, block, writes) for u in p.units]
    if all(u is not None for u in scoped):
        steps = [c for u in scoped for c in u]
        _, got = apply_pipeline(steps, cur)
        if {(d.row_id, d.attr): d.new for d in got} == _expected(cur, want):
            return [tuple(u) for u in scoped], "key" if block.key else "row_id"
    prov = Provenance("block_pin")
    pins = _pin_cells(
        [d for d in local_deltas if (d.row_id, d.attr) in _expected(cur, want)], prov
    )
    return [(c,) for c in pins], "pinned"


def _expected(cur: Relation, want: dict) -> dict:
    from .relation import values_equal

    return {k: v for k, v in want.items() if not values_equal(cur.value(*k), v)}


# -- worker-driver parallel search ------------------------------------------------------


@dataclass(frozen=True)
class Descriptor:
    """What travels between workers: steps and cost, never a relation."""

    pipeline: Pipeline
    cost: float
    order: tuple
    result_hash: int
    expanded_upto: int = 0


@dataclass(frozen=True)
class Assignment:
    descriptor: Descriptor
    rank: int
    replica: int = 0
    replicas: int = 1


@dataclass(frozen=True)
class AssignCandidates:
    round: int
    items: tuple[Assignment, ...]
    best_cost: float


@dataclass(frozen=True)
class TopEntry:
    result_hash: int
    cost: float
    order: tuple
    depth: int


@dataclass(frozen=True)
class LocalTop:
    worker: int
    entries: tuple[TopEntry, ...]
    created: tuple[int, ...]


@dataclass(frozen=True)
class GlobalBest:
    cost: float
    keep: frozenset[int]
    want: int | None = None


@dataclass(frozen=True)
class Rebalance:
    counts: tuple[int, ...]
    targets: tuple[int, ...]
    moves: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class Transfer:
    source: int
    descriptors: tuple[Descriptor, ...]


WorkerMsg = AssignCandidates | LocalTop | GlobalBest | Rebalance | Transfer


def rebalance_targets(counts: Sequence[int]) -> list[int]:
    """Spread ``sum(counts)`` so no worker exceeds ``ceil(total / j)``; larger holders keep the extras."""
    j, total = len(counts), sum(counts)
    q, rem = divmod(total, j)
    order = sorted(range(j), key=lambda i: (-counts[i], i))
    targets = [q] * j
    for i in order[:rem]:
        targets[i] += 1
    return targets


def plan_moves(counts: Sequence[int], targets: Sequence[int]) -> list[tuple[int, int, int]]:
    give = [(i, c - t) for i, (c, t) in enumerate(zip(counts, targets)) if c > t]
    take = [(i, t - c) for i, (c, t) in enumerate(zip(counts, targets)) if t > c]
    moves = []
    gi = ti = 0
    while gi < len(give) and ti < len(take):
        (s, g), (d, n) = give[gi], take[ti]
        m = min(g, n)
        moves.append((s, d, m))
        give[gi], take[ti] = (s, g - m), (d, n - m)
        if give[gi][1] == 0:
            gi += 1
        if take[ti][1] == 0:
            ti += 1
    return moves


class _Worker:
    def __init__(self, wid: int, engine: Engine, units: list[Unit], peers: list["_Worker"],
                 replies: queue.Queue, fault: Callable[[int, int], None] | None):
        self.wid, self.eng, self.units, self.peers = wid, engine, units, peers
        self.inbox: queue.Queue = queue.Queue()
        self.replies = replies
        self.fault = fault
        self.held: dict[int, Candidate] = {}
        self.children: dict[int, Candidate] = {}
        self.thread = threading.Thread(target=self._loop, name=f"worker-{wid}", daemon=True)

    def _loop(self) -> None:
        while True:
            msg = self.inbox.get()
            if msg is None:
                return
            try:
                self._handle(msg)
            except BaseException as exc:  # surfaced by the driver
                self.replies.put(("panic", self.wid, exc))

    def _candidate(self, d: Descriptor) -> Candidate:
        c = self.held.get(d.result_hash)
        if c is None:
            c = self.eng.score_pipeline(d.pipeline)
            c.order = d.order
        c.expanded_upto = d.expanded_upto
        return c

    def _handle(self, msg) -> None:
        if isinstance(msg, AssignCandidates):
            if self.fault:
                self.fault(self.wid, msg.round)
            self._expand(msg)
        elif isinstance(msg, GlobalBest):
            pool = {**self.held, **self.children}
            self.held = {h: c for h, c in pool.items() if h in msg.keep}
            self.children = {}
            best = None
            if msg.want is not None and msg.want in self.held:
                best = self._describe(self.held[msg.want])
            self.replies.put(("kept", self.wid, (len(self.held), best)))
        elif isinstance(msg, Rebalance):
            incoming = sum(n for s, d, n in msg.moves if d == self.wid)
            for s, d, n in msg.moves:
                if s != self.wid:
                    continue
                mine = sorted(self.held.values(), key=Candidate.sort_key)
                out = mine[len(mine) - n:]
                for c in out:
                    del self.held[c.result_hash]
                self.peers[d].inbox.put(Transfer(self.wid, tuple(self._describe(c) for c in out)))
            got = []
            while incoming > 0:
                t = self.inbox.get()
                if not isinstance(t, Transfer):
                    raise RuntimeError(f"worker {self.wid} expected a transfer, got {t!r}")
                for dsc in t.descriptors:
                    # receiver rebuilds the materialization from the root
                    c = self.eng.score_pipeline(dsc.pipeline)
                    c.order = dsc.order
                    c.expanded_upto = dsc.expanded_upto
                    c.materialized = None
                    self.held[c.result_hash] = c
                    got.append(dsc.result_hash)
                incoming -= len(t.descriptors)
            held = tuple(self._describe(c) for c in self.held.values())
            self.replies.put(("rebalanced", self.wid, (held, tuple(got))))

    def _describe(self, c: Candidate) -> Descriptor:
        return Descriptor(c.pipeline, c.cost, c.order, c.result_hash, c.expanded_upto)

    def _expand(self, msg: AssignCandidates) -> None:
        k = self.eng.cfg.max_depth
        n_units = len(self.units)
        children: list[Candidate] = []
        mark = len(self.eng.created)
        for a in msg.items:
            cand = self._candidate(a.descriptor)
            if a.replica == 0:
                self.held[cand.result_hash] = cand
            if cand.depth >= k:
                continue
            for ui in range(a.descriptor.expanded_upto, n_units):
                if ui % a.replicas != a.replica:
                    continue
                child = self.eng.extend(cand, self.units[ui], (msg.round, a.rank, ui))
                if child is not None:
                    children.append(child)
            cand.expanded_upto = n_units
        created = self.eng.created[mark:]
        # local retention against the driver's incumbent
        gamma, cap = self.eng.cfg.gamma, self.eng.cfg.frontier_cap
        local = []
        if children:
            cstar = min(msg.best_cost, min(c.cost for c in children))
            if cstar > 0:
                local = [c for c in children if c.cost <= cstar / gamma]
            else:
                local = [c for c in children if c.cost == 0]
            local.sort(key=Candidate.sort_key)
            local = local[:cap]
        for c in children:
            if c not in local:
                c.materialized = None
        self.children = {c.result_hash: c for c in local}
        entries = tuple(TopEntry(c.result_hash, c.cost, c.order, c.depth) for c in local)
        self.replies.put(("top", self.wid, LocalTop(self.wid, entries, tuple(created))))


@dataclass(eq=False)
class _Entry:
    result_hash: int
    cost: float
    order: tuple
    depth: int
    expanded_upto: int
    worker: int

    def sort_key(self):
        return (self.cost, self.order, self.depth)


def run_parallel(
    root: Relation,
    spec: QualitySpec,
    pool: Iterable[Sequence[ConditionalAssignment]] | BatchPool,
    cfg: SearchConfig,
    j: int,
    model: PruningModel | None = None,
    fault: Callable[[int, int], None] | None = None,
) -> SearchOutcome:
    """Round-synchronous frontier search over ``j`` in-process workers.

    Per round: the driver assigns frontier members to workers (replicating
    them with a seeded choice when there are fewer members than workers),
    workers expand and report their local top, barrier 1 fixes the global
    retained set, workers drop everything else, and barrier 2 rebalances
    held candidates to at most ``ceil(total / j)`` per worker.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    src = pool if isinstance(pool, BatchPool) else BatchPool(pool)
    units: list[Unit] = []
    keys: set[Unit] = set()
    for u in src.drain():
        if u not in keys:
            keys.add(u)
            units.append(u)
    start = time.perf_counter()
    driver = Engine(root, spec, cfg, model, start)
    root_c = driver.root_candidate
    replies: queue.Queue = queue.Queue()
    peers: list[_Worker] = []
    for w in range(j):
        eng = Engine(root, spec, cfg, model, start, root_c.report)
        eng.shared_seen = driver.seen
        peers.append(_Worker(w, eng, units, peers, replies, fault))
    for p in peers:
        p.thread.start()

    def gather(kind: str) -> dict[int, object]:
        got: dict[int, object] = {}
        while len(got) < j:
            tag, wid, payload = replies.get()
            if tag == "panic":
                raise WorkerPanic(wid, payload)
            if tag != kind:
                raise RuntimeError(f"protocol error: expected {kind}, got {tag} from {wid}")
            got[wid] = payload
        return got

    rng = random.Random(cfg.seed)
    frontier = [_Entry(root_c.result_hash, root_c.cost, root_c.order, 0, 0, 0)]
    descriptors: dict[int, Descriptor] = {
        root_c.result_hash: Descriptor(root_c.pipeline, root_c.cost, root_c.order, root_c.result_hash)
    }
    best_entry = frontier[0]
    best_desc = descriptors[root_c.result_hash]
    trace = [TracePoint(0.0, root_c.cost, 0, root_c.pipeline)]
    events: list = []
    rounds = 0
    k = cfg.max_depth
    try:
        while cfg.time_budget_s > 0 and time.perf_counter() - start < cfg.time_budget_s:
            if best_entry.cost == 0:
                break
            todo = [i for i, e in enumerate(frontier) if e.depth < k and e.expanded_upto < len(units)]
            if not todo:
                break
            rounds += 1
            # assignment, with seeded replication when workers would idle
            plan: dict[int, list[Assignment]] = {w: [] for w in range(j)}
            replicas: dict[int, list[int]] = {i: [frontier[i].worker] for i in range(len(frontier))}
            busy = {frontier[i].worker for i in todo}
            if len(frontier) < j:
                for w in range(j):
                    if w not in busy:
                        pick = todo[rng.randrange(len(todo))]
                        replicas[pick].append(w)
            for rank, e in enumerate(frontier):
                d = replace(descriptors[e.result_hash], expanded_upto=e.expanded_upto, order=e.order)
                holders = replicas[rank]
                for r, w in enumerate(holders):
                    plan[w].append(Assignment(d, rank, r, len(holders)))
            for w in range(j):
                peers[w].inbox.put(AssignCandidates(rounds, tuple(plan[w]), frontier[0].cost))
            tops = gather("top")
            # barrier 1: global retention over the union of local tops
            children: dict[int, _Entry] = {}
            for w in range(j):
                top = tops[w]
                for t in top.entries:
                    prev = children.get(t.result_hash)
                    if prev is None or t.order < prev.order:
                        children[t.result_hash] = _Entry(t.result_hash, t.cost, t.order, t.depth, 0, w)
                driver.seen.update(top.created)
            for e in frontier:
                e.expanded_upto = len(units)
            union = frontier + list(children.values())
            kept = retain(union, cfg.gamma, cfg.frontier_cap)  # type: ignore[arg-type]
            keep = frozenset(e.result_hash for e in kept)
            improved = kept[0].sort_key() < best_entry.sort_key() and kept[0].cost < best_entry.cost
            want = kept[0].result_hash if improved else None
            # every worker drops what it should not hold; duplicate copies go too
            for w in range(j):
                mine = frozenset(e.result_hash for e in kept if e.worker == w)
                peers[w].inbox.put(GlobalBest(kept[0].cost, mine, want if want in mine else None))
            kept_replies = gather("kept")
            if improved:
                dsc = next(b for _, b in kept_replies.values() if b is not None)
                best_entry, best_desc = kept[0], dsc
                descriptors[dsc.result_hash] = dsc
                trace.append(TracePoint(time.perf_counter() - start, kept[0].cost,
                                        sum(p.eng.expanded for p in peers), dsc.pipeline))
            # barrier 2: rebalance held candidates
            counts = [0] * j
            for e in kept:
                counts[e.worker] += 1
            targets = rebalance_targets(counts)
            moves = tuple(plan_moves(counts, targets))
            for w in range(j):
                peers[w].inbox.put(Rebalance(tuple(counts), tuple(targets), moves))
            reb = gather("rebalanced")
            where: dict[int, int] = {}
            for w, (held, _) in reb.items():
                for dsc in held:
                    where[dsc.result_hash] = w
                    descriptors.setdefault(dsc.result_hash, dsc)
            for e in kept:
                e.worker = where[e.result_hash]
            after = [len(reb[w][0]) for w in range(j)]
            events.append(("rebalance", rounds, tuple(counts), tuple(after)))
            frontier = kept
            if all(e.depth >= k for e in frontier):
                break
            if not improved:
                break
    finally:
        for p in peers:
            p.inbox.put(None)
        for p in peers:
            p.thread.join(timeout=5.0)
    result, _ = apply_pipeline(best_desc.pipeline, root)
    report = evaluate(spec, result)
    best = Candidate(best_desc.pipeline, report.total_cost, report, hash_relation(result), result,
                     best_desc.order)
    expanded = sum(p.eng.expanded for p in peers)
    pruned: dict[str, int] = {}
    for p in peers:
        for key, v in p.eng.pruned.items():
            pruned[key] = pruned.get(key, 0) + v
    return SearchOutcome(best, expanded, pruned, trace, rounds, len(units), events)
