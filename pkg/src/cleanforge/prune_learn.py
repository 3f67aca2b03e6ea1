"""Learned pruning of search extensions.

Assignments are featurized from their predicate attributes, target,
generating operator and numeric parameters.  A logistic regression is
fit on assignments labelled by whether they ended up in a block's best
pipeline, and its accept threshold is lowered until every training
positive is accepted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateTraining, DimensionMismatch, UnknownOperator
from .relation import Schema
from .repair_ir import AttrEquals, ConditionalAssignment, Pipeline, TupleEquals
from .text import levenshtein

CALIBRATION_MARGIN = 1e-12


@dataclass(frozen=True)
class FeatureSpace:
    attrs: tuple[str, ...]
    ops: tuple[str, ...]
    max_num_params: int = 0

    @classmethod
    def build(cls, schema: Schema, ops: Iterable[str], max_num_params: int = 0) -> "FeatureSpace":
        return cls(tuple(schema.names), tuple(ops), int(max_num_params))

    @property
    def names(self) -> list[str]:
        return (
            [f"pred:{a}" for a in self.attrs]
            + [f"target:{a}" for a in self.attrs]
            + [f"op:{o}" for o in self.ops]
            + [f"num:{i}" for i in range(self.max_num_params)]
            + ["edit_distance"]
        )

    @property
    def dim(self) -> int:
        return 2 * len(self.attrs) + len(self.ops) + self.max_num_params + 1

    def featurize(self, ca: ConditionalAssignment) -> tuple[float, ...]:
        n = len(self.attrs)
        pos = {a: i for i, a in enumerate(self.attrs)}
        fv = [0.0] * self.dim
        for a in ca.pred.attrs():
            fv[pos[a]] = 1.0
        fv[n + pos[ca.target]] = 1.0
        op = ca.provenance.operator
        try:
            fv[2 * n + self.ops.index(op)] = 1.0
        except ValueError:
            raise UnknownOperator(f"operator {op!r} is not registered") from None
        base = 2 * n + len(self.ops)
        for i, x in enumerate(ca.provenance.numeric_params[: self.max_num_params]):
            fv[base + i] = float(x)
        fv[-1] = float(_literal_distance(ca))
        return tuple(fv)


def _literal_distance(ca: ConditionalAssignment) -> int:
    """Edit distance from the target attribute's predicate constant to the new value."""
    if not isinstance(ca.value, str):
        return 0
    for c in ca.pred.clauses:
        if isinstance(c, AttrEquals) and c.attr == ca.target and isinstance(c.value, str):
            return levenshtein(c.value, ca.value)
        if isinstance(c, TupleEquals) and ca.target in c.attr_names:
            v = c.values[c.attr_names.index(ca.target)]
            if isinstance(v, str):
                return levenshtein(v, ca.value)
    return 0


def featurize(
    ca: ConditionalAssignment, schema: Schema, op_registry: Sequence[str], max_num_params: int = 0
) -> tuple[float, ...]:
    return FeatureSpace.build(schema, op_registry, max_num_params).featurize(ca)


@dataclass
class TrainingSet:
    examples: list[tuple[tuple[float, ...], bool]] = field(default_factory=list)

    def add(self, fv: Sequence[float], include: bool) -> None:
        self.examples.append((tuple(fv), bool(include)))

    def add_block(
        self, space: FeatureSpace, pooled: Iterable[ConditionalAssignment], best: Pipeline
    ) -> None:
        """Label a block's pool: best-pipeline steps include, the rest exclude."""
        chosen = set(best.steps)
        for ca in pooled:
            self.add(space.featurize(ca), ca in chosen)

    def extend(self, other: "TrainingSet") -> None:
        self.examples.extend(other.examples)

    @property
    def n_include(self) -> int:
        return sum(1 for _, y in self.examples if y)

    @property
    def n_exclude(self) -> int:
        return len(self.examples) - self.n_include

    def __len__(self) -> int:
        return len(self.examples)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class PruningModel:
    weights: tuple[float, ...]
    bias: float = 0.0
    threshold: float = 0.5
    space: FeatureSpace | None = None
    disabled: bool = False

    @classmethod
    def accept_all(cls, space: FeatureSpace | None = None) -> "PruningModel":
        dim = space.dim if space else 0
        return cls((0.0,) * dim, 0.0, 0.0, space, disabled=True)

    def score(self, fv: Sequence[float]) -> float:
        if len(fv) != len(self.weights):
            raise DimensionMismatch(f"expected {len(self.weights)} features, got {len(fv)}")
        z = math.fsum(w * x for w, x in zip(self.weights, fv)) + self.bias
        return _sigmoid(z)

    def predict(self, fv: Sequence[float]) -> bool:
        """True means accept."""
        if self.disabled:
            return True
        return self.score(fv) >= self.threshold

    def accepts(self, ca: ConditionalAssignment, schema: Schema | None = None) -> bool:
        if self.disabled or self.space is None:
            return True
        try:
            fv = self.space.featurize(ca)
        except (UnknownOperator, KeyError):
            return True
        return self.predict(fv)

    def to_json(self) -> str:
        names = self.space.names if self.space else [f"x{i}" for i in range(len(self.weights))]
        return json.dumps(
            {
                "weights": list(self.weights),
                "bias": self.bias,
                "threshold": self.threshold,
                "feature_names": names,
                "disabled": self.disabled,
            },
            indent=2,
        )


def train(
    ts: TrainingSet,
    epochs: int = 200,
    rate: float = 0.1,
    seed: int = 0,
    space: FeatureSpace | None = None,
) -> PruningModel:
    """Full-batch gradient descent on log-loss from zero weights, then calibrate.

    Zero initialisation makes the fit independent of ``seed``; it is
    accepted for interface symmetry.
    """
    if ts.n_include == 0 or ts.n_exclude == 0:
        raise DegenerateTraining(
            f"need both classes, got {ts.n_include} include / {ts.n_exclude} exclude"
        )
    X = np.array([fv for fv, _ in ts.examples], dtype=float)
    y = np.array([1.0 if lab else 0.0 for _, lab in ts.examples])
    m, d = X.shape
    w, b = np.zeros(d), 0.0
    for _ in range(int(epochs)):
        z = X @ w + b
        e = np.exp(-np.abs(z))
        err = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)) - y
        w = w - rate * (X.T @ err) / m
        b = b - rate * float(err.sum()) / m
    model = PruningModel(tuple(float(v) for v in w), float(b), 0.5, space)
    return calibrate(model, ts)


def calibrate(model: PruningModel, ts: TrainingSet) -> PruningModel:
    positives = [model.score(fv) for fv, lab in ts.examples if lab]
    if not positives:
        return model
    thr = max(0.0, min(positives) - CALIBRATION_MARGIN)
    return PruningModel(model.weights, model.bias, thr, model.space, model.disabled)


def train_or_disable(ts: TrainingSet, space: FeatureSpace, **kw) -> PruningModel:
    try:
        return train(ts, space=space, **kw)
    except DegenerateTraining:
        return PruningModel.accept_all(space)


def false_negatives(model: PruningModel, ts: TrainingSet) -> int:
    return sum(1 for fv, lab in ts.examples if lab and not model.predict(fv))
