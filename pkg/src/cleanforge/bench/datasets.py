"""Seeded synthetic datasets with ground truth."""

from __future__ import annotations

import math
import random
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..errors import WordlistTooSmall
from ..relation import Attribute, Kind, Relation, Schema, write_csv


@dataclass
class Dataset:
    dirty: Relation
    truth: Relation
    words: list[str] | None = None

    def save(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"dirty": out / "dirty.csv", "truth": out / "truth.csv"}
        write_csv(self.dirty, str(paths["dirty"]))
        write_csv(self.truth, str(paths["truth"]))
        if self.words is not None:
            paths["dictionary"] = out / "dictionary.txt"
            paths["dictionary"].write_text("".join(w + "\n" for w in self.words), encoding="utf-8")
        return paths


@lru_cache(maxsize=1)
def bundled_words() -> tuple[str, ...]:
    text = resources.files("cleanforge.bench").joinpath("data/words.txt").read_text("utf-8")
    return tuple(sorted({w.strip() for w in text.splitlines() if w.strip()}))


def _corrupt(word: str, edits: int, rng: random.Random) -> str:
    w = word
    for _ in range(edits):
        op = rng.choice(("insert", "delete", "substitute")) if len(w) > 1 else "insert"
        i = rng.randrange(len(w) + (op == "insert"))
        c = rng.choice(string.ascii_lowercase)
        if op == "insert":
            w = w[:i] + c + w[i:]
        elif op == "delete":
            w = w[:i] + w[i + 1 :]
        else:
            w = w[:i] + c + w[i + 1 :]
    return w


def gen_dictionary(
    n: int, corrupt_frac: float, max_edits: int, seed: int = 0, wordlist=None
) -> Dataset:
    """``n`` distinct words plus ``floor(corrupt_frac * n)`` misspelled duplicates.

    Each duplicate gets 1..max_edits random character edits and never
    collides with a dictionary word.  The dictionary is the ``n`` words.
    """
    if not 0 < corrupt_frac < 1:
        raise ValueError("corrupt_frac must lie in (0, 1)")
    if max_edits < 1:
        raise ValueError("max_edits must be >= 1")
    pool = sorted(set(wordlist)) if wordlist is not None else list(bundled_words())
    if len(pool) < n:
        raise WordlistTooSmall(f"wordlist has {len(pool)} words, {n} requested")
    rng = random.Random(seed)
    words = rng.sample(pool, n)
    vocab = set(words)
    m = math.floor(corrupt_frac * n)
    dirty_rows = [[w] for w in words]
    truth_rows = [[w] for w in words]
    for i in sorted(rng.sample(range(n), m)):
        w = words[i]
        while True:
            bad = _corrupt(w, rng.randint(1, max_edits), rng)
            if bad and bad != w and bad not in vocab:
                break
        dirty_rows.append([bad])
        truth_rows.append([w])
    order = list(range(len(dirty_rows)))
    rng.shuffle(order)
    schema = Schema([Attribute("word", Kind.TEXT)])
    dirty = Relation.from_rows(schema, [dirty_rows[i] for i in order])
    truth = Relation.from_rows(schema, [truth_rows[i] for i in order])
    return Dataset(dirty, truth, sorted(words))


def gen_city(n_groups: int, err_frac: float, seed: int = 0, rows_per_group: int = 5) -> Dataset:
    """City table with the dependency ``city_code -> city_name``.

    ``round(err_frac * cells)`` cells are corrupted, by misspelling a name
    (one cell) or swapping the codes of two rows from different groups
    (two cells); every corrupted row belongs to a different group.
    """
    if not 0 < err_frac < 1:
        raise ValueError("err_frac must lie in (0, 1)")
    if n_groups < 1 or rows_per_group < 1:
        raise ValueError("n_groups and rows_per_group must be >= 1")
    rng = random.Random(seed)
    pool = [w for w in bundled_words() if len(w) >= 5]
    names = [w.capitalize() for w in rng.sample(pool, n_groups)]
    codes = [f"{nm[:3].upper()}{i}" for i, nm in enumerate(names)]
    truth_rows = [[names[g], codes[g]] for g in range(n_groups) for _ in range(rows_per_group)]
    dirty_rows = [list(r) for r in truth_rows]
    n_rows = len(truth_rows)
    budget = round(err_frac * 2 * n_rows)
    groups = list(range(n_groups))
    rng.shuffle(groups)

    def pick_row(g: int) -> int:
        return g * rows_per_group + rng.randrange(rows_per_group)

    gi = 0
    while budget > 0:
        if gi >= len(groups):
            raise ValueError("err_frac too high for one corrupted row per group")
        if budget >= 2 and gi + 1 < len(groups) and rng.random() < 0.5:
            ga, gb = groups[gi], groups[gi + 1]
            gi += 2
            a, b = pick_row(ga), pick_row(gb)
            dirty_rows[a][1], dirty_rows[b][1] = dirty_rows[b][1], dirty_rows[a][1]
            budget -= 2
        else:
            g = groups[gi]
            gi += 1
            r = pick_row(g)
            while True:
                bad = _corrupt(names[g].lower(), 1, rng).capitalize()
                if bad != names[g] and bad not in names:
                    break
            dirty_rows[r][0] = bad
            budget -= 1
    schema = Schema([Attribute("city_name", Kind.TEXT), Attribute("city_code", Kind.TEXT)])
    return Dataset(Relation.from_rows(schema, dirty_rows), Relation.from_rows(schema, truth_rows))


def gen_timeseries(n: int, outlier_frac: float, magnitude: float, seed: int = 0) -> Dataset:
    """Smooth periodic signal with ``round(outlier_frac * n)`` spikes of +-magnitude."""
    if not 0 < outlier_frac < 1:
        raise ValueError("outlier_frac must lie in (0, 1)")
    rng = random.Random(seed)
    base = [round(10.0 * math.sin(2 * math.pi * i / 50) + rng.gauss(0, 0.1), 3) for i in range(n)]
    dirty = list(base)
    for i in sorted(rng.sample(range(n), round(outlier_frac * n))):
        dirty[i] = round(base[i] + rng.choice((-1.0, 1.0)) * magnitude, 3)
    schema = Schema([Attribute("t", Kind.NUMBER), Attribute("value", Kind.NUMBER)])
    return Dataset(
        Relation.from_rows(schema, [[float(i), v] for i, v in enumerate(dirty)]),
        Relation.from_rows(schema, [[float(i), v] for i, v in enumerate(base)]),
    )
