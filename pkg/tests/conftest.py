import pytest

from cleanforge.relation import Kind, Relation, Schema
from cleanforge.repair_ir import AttrEquals, ConditionalAssignment, Predicate, Provenance

CITY_SCHEMA = Schema([("city_name", Kind.TEXT), ("city_code", Kind.TEXT)])
CITY_ROWS = [
    ("San Francisco", "SF"),
    ("New York", "NY"),
    ("New York City", "NY"),
]


def city_table() -> Relation:
    return Relation.from_rows(CITY_SCHEMA, CITY_ROWS)


def fr(attr, x, y, op="find_replace"):
    return ConditionalAssignment(Predicate(AttrEquals(attr, x)), attr, y, Provenance(op))


@pytest.fixture
def city():
    return city_table()
