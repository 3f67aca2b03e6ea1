"""String distance helpers."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from rapidfuzz import process as _process
from rapidfuzz.distance import Levenshtein as _Lev


def levenshtein(a: str, b: str, max_dist: int | None = None) -> int:
    """Unit-cost insert/delete/substitute distance.

    With ``max_dist`` the result is exact when it is ``<= max_dist`` and
    ``max_dist + 1`` otherwise.
    """
    return _Lev.distance(a, b, score_cutoff=max_dist)


def distance_matrix(queries: Sequence[str], choices: Sequence[str], max_dist: int):
    """All-pairs distances as an int32 array; entries above ``max_dist`` read ``max_dist + 1``."""
    return _process.cdist(
        queries, choices, scorer=_Lev.distance, score_cutoff=max_dist, dtype=np.int32
    )
