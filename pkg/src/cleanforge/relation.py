"""Immutable relational snapshots with stable row ids.

Cells hold ``None`` (Null), ``str`` (Text) or ``float`` (Number).  A
relation is stored column-major; operations that change cells copy only
the touched columns and share the rest with the parent snapshot.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import DataError, IoError, ParseError, SchemaMismatch, TypeMismatch, UnknownAttribute

Value = Union[None, str, float]

_MASK64 = (1 << 64) - 1


class Kind(str, Enum):
    TEXT = "text"
    NUMBER = "number"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: Kind


class Schema:
    """Ordered, named, typed attribute list."""

    __slots__ = ("attributes", "_index", "_digest")

    def __init__(self, attributes: Iterable[Attribute | tuple[str, Kind | str]]):
        attrs = []
        for a in attributes:
            if not isinstance(a, Attribute):
                name, kind = a
                a = Attribute(name, Kind(kind))
            attrs.append(a)
        self.attributes: tuple[Attribute, ...] = tuple(attrs)
        self._index = {}
        for i, a in enumerate(self.attributes):
            if not a.name:
                raise SchemaMismatch("attribute names must be nonempty")
            if a.name in self._index:
                raise SchemaMismatch(f"duplicate attribute name {a.name!r}")
            self._index[a.name] = i
        h = hashlib.blake2b(digest_size=8)
        for a in self.attributes:
            h.update(f"{a.name}\x1f{a.kind.value}\x1e".encode())
        self._digest = int.from_bytes(h.digest(), "big")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownAttribute(f"unknown attribute {name!r}") from None

    def kind(self, name: str) -> Kind:
        return self.attributes[self.index(name)].kind

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.attributes)

    def __iter__(self) -> Iterator[Attribute]:
        return iter(self.attributes)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.attributes == other.attributes

    def __hash__(self) -> int:
        return hash(self.attributes)

    def __repr__(self) -> str:
        inner = ", ".join(f"({a.name}, {a.kind.value})" for a in self.attributes)
        return f"Schema[{inner}]"


def normalize_number(x: Any) -> Value:
    """Coerce to the canonical Number representation; NaN becomes Null."""
    if x is None:
        return None
    if isinstance(x, bool):
        raise TypeMismatch(f"boolean {x!r} is not a Number")
    f = float(x)
    if math.isnan(f):
        return None
    if f == 0.0:
        return 0.0  # drop the sign of -0.0
    return f


def check_value(value: Value, kind: Kind) -> Value:
    """Validate ``value`` against ``kind`` and return its canonical form."""
    if value is None:
        return None
    if kind is Kind.TEXT:
        if not isinstance(value, str):
            raise TypeMismatch(f"expected Text, got {value!r}")
        return value
    if isinstance(value, str) or isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatch(f"expected Number, got {value!r}")
    return normalize_number(value)


def values_equal(a: Value, b: Value) -> bool:
    return type(a) is type(b) and a == b


def format_number(x: float) -> str:
    """Shortest decimal that round-trips; integral values drop the fraction."""
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def render_value(v: Value) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_number(v)
    return v


@dataclass(frozen=True)
class CellRef:
    row_id: int
    attr: str


@dataclass(frozen=True)
class CellDelta:
    cell: CellRef
    old: Value
    new: Value

    @property
    def row_id(self) -> int:
        return self.cell.row_id

    @property
    def attr(self) -> str:
        return self.cell.attr


class Relation:
    """An immutable table snapshot.

    ``row_ids`` is strictly increasing.  Column lists are shared between
    snapshots and must never be mutated after construction.
    """

    __slots__ = ("schema", "row_ids", "_cols", "_pos", "_memo")

    def __init__(
        self,
        schema: Schema,
        columns: Sequence[list[Value]],
        row_ids: Sequence[int] | None = None,
        *,
        _trusted: bool = False,
    ):
        if len(columns) != len(schema):
            raise SchemaMismatch(f"{len(columns)} columns for {len(schema)} attributes")
        n = len(columns[0]) if columns else 0
        if _trusted:
            cols = tuple(columns)
        else:
            cols = []
            for attr, col in zip(schema, columns):
                if len(col) != n:
                    raise SchemaMismatch("columns differ in length")
                cols.append([check_value(v, attr.kind) for v in col])
            cols = tuple(cols)
        if row_ids is None:
            ids: Sequence[int] = range(n)
        else:
            ids = tuple(int(r) for r in row_ids)
            if len(ids) != n:
                raise SchemaMismatch("row_ids length differs from column length")
            if any(b <= a for a, b in zip(ids, ids[1:])):
                raise SchemaMismatch("row_ids must be strictly increasing")
        self.schema = schema
        self.row_ids = ids
        self._cols = cols
        self._pos: dict[int, int] | None = None
        self._memo: dict[Any, Any] = {}

    @classmethod
    def from_rows(
        cls,
        schema: Schema | Iterable[tuple[str, Kind | str]],
        rows: Iterable[Sequence[Value]],
        row_ids: Sequence[int] | None = None,
    ) -> "Relation":
        if not isinstance(schema, Schema):
            schema = Schema(schema)
        rows = [tuple(r) for r in rows]
        for r in rows:
            if len(r) != len(schema):
                raise SchemaMismatch(f"row {r!r} has {len(r)} fields, expected {len(schema)}")
        cols = [list(c) for c in zip(*rows)] if rows else [[] for _ in schema]
        return cls(schema, cols, row_ids)

    # -- access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.row_ids)

    def column(self, attr: str) -> list[Value]:
        return self._cols[self.schema.index(attr)]

    def column_at(self, index: int) -> list[Value]:
        return self._cols[index]

    @property
    def columns(self) -> tuple[list[Value], ...]:
        return self._cols

    def position(self, row_id: int) -> int:
        if isinstance(self.row_ids, range):
            if 0 <= row_id < len(self.row_ids):
                return row_id
            raise KeyError(row_id)
        if self._pos is None:
            self._pos = {r: i for i, r in enumerate(self.row_ids)}
        return self._pos[row_id]

    def has_row(self, row_id: int) -> bool:
        try:
            self.position(row_id)
        except KeyError:
            return False
        return True

    def value(self, row_id: int, attr: str) -> Value:
        return self._cols[self.schema.index(attr)][self.position(row_id)]

    def row(self, row_id: int) -> tuple[Value, ...]:
        p = self.position(row_id)
        return tuple(c[p] for c in self._cols)

    def rows(self) -> Iterator[tuple[int, tuple[Value, ...]]]:
        for p, rid in enumerate(self.row_ids):
            yield rid, tuple(c[p] for c in self._cols)

    def memo(self, key: Any, factory: Callable[[], Any]) -> Any:
        """Per-snapshot cache for derived read-only structures."""
        try:
            return self._memo[key]
        except KeyError:
            val = self._memo[key] = factory()
            return val

    def index(self, attr: str) -> dict[Value, list[int]]:
        """Map value -> positions holding it, built lazily once per snapshot."""
        i = self.schema.index(attr)

        def build() -> dict[Value, list[int]]:
            idx: dict[Value, list[int]] = {}
            for p, v in enumerate(self._cols[i]):
                idx.setdefault(v, []).append(p)
            return idx

        return self.memo(("index", i), build)

    # -- derivation ---------------------------------------------------------

    def with_updates(self, updates: Mapping[int, Mapping[int, Value]]) -> "Relation":
        """New snapshot with ``{attr_index: {position: value}}`` written."""
        cols = list(self._cols)
        for ai, cells in updates.items():
            if not cells:
                continue
            col = list(cols[ai])
            for p, v in cells.items():
                col[p] = v
            cols[ai] = col
        rel = Relation(self.schema, cols, self.row_ids, _trusted=True)
        rel._pos = self._pos
        return rel

    def apply_deltas(self, deltas: Iterable[CellDelta]) -> "Relation":
        updates: dict[int, dict[int, Value]] = {}
        for d in deltas:
            ai = self.schema.index(d.attr)
            updates.setdefault(ai, {})[self.position(d.row_id)] = d.new
        return self.with_updates(updates)

    def restrict(self, row_ids: Iterable[int]) -> "Relation":
        """Sub-relation over ``row_ids`` keeping their ids."""
        ids = sorted(set(row_ids))
        pos = [self.position(r) for r in ids]
        cols = [[c[p] for p in pos] for c in self._cols]
        return Relation(self.schema, cols, ids, _trusted=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        if self.schema != other.schema or tuple(self.row_ids) != tuple(other.row_ids):
            return False
        for a, b in zip(self._cols, other._cols):
            if a is b:
                continue
            if any(not values_equal(x, y) for x, y in zip(a, b)):
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Relation({self.schema!r}, {len(self)} rows)"


# -- hashing ------------------------------------------------------------------


def _cell_hash(row_id: int, attr_index: int, v: Value) -> int:
    if v is None:
        tag = "n"
    elif isinstance(v, float):
        tag = "f" + repr(v)
    else:
        tag = "s" + v
    data = f"{row_id}\x1f{attr_index}\x1f{tag}".encode("utf-8", "surrogatepass")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def hash_relation(rel: Relation) -> int:
    """Seedless 64-bit digest over schema, row ids and cells.

    The digest is a sum of per-cell digests, so a snapshot derived by a
    list of deltas can be rehashed in time proportional to the deltas
    (see :func:`rehash`).
    """

    def compute() -> int:
        total = rel.schema._digest
        for ai, col in enumerate(rel.columns):
            for rid, v in zip(rel.row_ids, col):
                total += _cell_hash(rid, ai, v)
        return total & _MASK64

    return rel.memo("hash", compute)


def rehash(digest: int, schema: Schema, deltas: Iterable[CellDelta]) -> int:
    """Digest of the relation obtained by applying ``deltas``."""
    for d in deltas:
        ai = schema.index(d.attr)
        digest += _cell_hash(d.row_id, ai, d.new) - _cell_hash(d.row_id, ai, d.old)
    return digest & _MASK64


# -- diffing ------------------------------------------------------------------


def diff(a: Relation, b: Relation) -> list[CellDelta]:
    """Cells where ``a`` and ``b`` differ, ordered by (row_id, attribute index)."""
    if a.schema != b.schema:
        raise SchemaMismatch("relations have different schemas")
    if tuple(a.row_ids) != tuple(b.row_ids):
        raise SchemaMismatch("relations have different row ids")
    found: list[tuple[int, int, CellDelta]] = []
    for ai, (ca, cb) in enumerate(zip(a.columns, b.columns)):
        if ca is cb:
            continue
        name = a.schema.attributes[ai].name
        for p, (x, y) in enumerate(zip(ca, cb)):
            if not values_equal(x, y):
                found.append((p, ai, CellDelta(CellRef(a.row_ids[p], name), x, y)))
    found.sort(key=lambda t: (t[0], t[1]))
    return [d for _, _, d in found]


# -- CSV ------------------------------------------------------------------------


def _parse_number(field: str) -> float | None:
    try:
        return float(field)
    except ValueError:
        return None


def load_csv(path: str, schema_hint: Schema | None = None) -> Relation:
    """Read an RFC-4180 CSV file with a header row.

    Without a hint, a column is Number when every non-empty field parses
    as a float.  Empty fields become Null.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError("missing header row", line=1) from None
            records: list[list[str]] = []
            for rec in reader:
                if len(rec) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, found {len(rec)}", line=reader.line_num
                    )
                records.append(rec)
    except UnicodeDecodeError as exc:
        raise ParseError(f"file is not valid UTF-8: {exc}") from exc
    except csv.Error as exc:
        raise ParseError(str(exc)) from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if schema_hint is not None:
        if list(schema_hint.names) != header:
            raise SchemaMismatch(f"schema hint {list(schema_hint.names)} does not match header {header}")
        schema = schema_hint
    else:
        attrs = []
        for j, name in enumerate(header):
            fields = [r[j] for r in records if r[j] != ""]
            numeric = bool(fields) and all(_parse_number(f) is not None for f in fields)
            attrs.append(Attribute(name, Kind.NUMBER if numeric else Kind.TEXT))
        schema = Schema(attrs)

    cols: list[list[Value]] = []
    for j, attr in enumerate(schema):
        col: list[Value] = []
        for i, r in enumerate(records):
            f = r[j]
            if f == "":
                col.append(None)
            elif attr.kind is Kind.NUMBER:
                x = _parse_number(f)
                if x is None:
                    raise ParseError(f"field {f!r} of {attr.name!r} is not a number", line=i + 2)
                col.append(normalize_number(x))
            else:
                col.append(f)
        cols.append(col)
    return Relation(schema, cols, _trusted=True)


def write_csv(rel: Relation, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            # minimal quoting leaves a bare \r unquoted when the terminator is \n
            w_all = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_ALL)
            w.writerow(rel.schema.names)
            for _, row in rel.rows():
                fields = [render_value(v) for v in row]
                (w_all if any("\r" in f for f in fields) else w).writerow(fields)
    except csv.Error as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
