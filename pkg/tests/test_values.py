import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trieflow.errors import CoercionError, UnknownIdError
from trieflow.values import DataValue, Dictionary, Ordering, PositionType, Sort, compare, coerce

text = st.text(max_size=6)
values = st.one_of(
    text.map(DataValue.iri),
    text.map(DataValue.string),
    st.tuples(text, st.sampled_from(["en", "de", "en-gb"])).map(lambda t: DataValue.lang_string(*t)),
    st.integers(-(2**63), 2**63 - 1).map(DataValue.integer),
    st.floats(allow_nan=False).map(DataValue.double),
    st.integers(0, 50).map(DataValue.null),
)


def test_intern_is_idempotent_and_dense():
    d = Dictionary()
    assert d.intern(DataValue.string("Tilia")) == 0
    assert d.intern(DataValue.string("Tilia")) == 0
    ids = [d.intern(DataValue.integer(7)), d.intern(DataValue.string("Tilia")), d.intern(DataValue.iri("a"))]
    assert ids == [1, 0, 2]


def test_resolve_round_trip_and_unknown():
    d = Dictionary()
    assert d.resolve(d.intern(DataValue.integer(42))) == DataValue.integer(42)
    assert d.resolve(d.intern(DataValue.iri("http://ex/a"))) == DataValue.iri("http://ex/a")
    with pytest.raises(UnknownIdError):
        d.resolve(len(d))
    with pytest.raises(KeyError):
        d.resolve(-1)


def test_compare_examples():
    assert compare(DataValue.integer(2), DataValue.integer(10)) is Ordering.LESS
    assert compare(DataValue.string("10"), DataValue.integer(2)) is Ordering.LESS
    ranks = [DataValue.iri("z"), DataValue.string("a"), DataValue.lang_string("a", "de"),
             DataValue.integer(-5), DataValue.double(-1e9), DataValue.null(0)]
    assert sorted(reversed(ranks)) == ranks
    assert compare(DataValue.lang_string("b", "de"), DataValue.lang_string("a", "en")) is Ordering.LESS


@given(values)
def test_compare_reflexive(v):
    assert compare(v, v) is Ordering.EQUAL


@given(values, values)
def test_compare_antisymmetric_total(a, b):
    ab, ba = compare(a, b), compare(b, a)
    assert ab == -ba
    assert (ab is Ordering.EQUAL) == (a == b)


@given(values, values, values)
def test_compare_transitive(a, b, c):
    if compare(a, b) <= 0 and compare(b, c) <= 0:
        assert compare(a, c) <= 0


def test_large_round_trip_and_sorted_copy():
    rng = random.Random(7)
    d = Dictionary()
    pool = [DataValue.integer(rng.randrange(10**6)) for _ in range(50_000)]
    pool += [DataValue.string(str(rng.random())) for _ in range(50_000)]
    ids = [d.intern(v) for v in pool]
    assert [d.resolve(i) for i in ids] == pool
    fresh, remap = d.sorted_copy()
    assert len(fresh) == len(d)
    assert fresh.values == sorted(d.values)
    for i in rng.sample(range(len(pool)), 500):
        assert fresh.resolve(int(remap[ids[i]])) == pool[i]


def test_coerce_examples():
    assert coerce(DataValue.string("337"), PositionType.INTEGER) == DataValue.integer(337)
    with pytest.raises(CoercionError) as err:
        coerce(DataValue.string("Tilia"), PositionType.INTEGER, predicate="tree", position=2, line=4)
    message = str(err.value)
    assert "tree" in message and "Tilia" in message and "4" in message
    assert coerce(DataValue.integer(5), PositionType.DOUBLE) == DataValue.double(5.0)
    assert coerce(DataValue.string("-1.5e2"), PositionType.DOUBLE) == DataValue.double(-150.0)
    assert coerce(DataValue.iri("x"), PositionType.ANY) == DataValue.iri("x")
    with pytest.raises(CoercionError):
        coerce(DataValue.integer(1), PositionType.STRING)


@given(values, st.sampled_from(list(PositionType)))
def test_coerce_idempotent(v, declared):
    if v.sort is Sort.NULL:
        return
    try:
        once = coerce(v, declared)
    except CoercionError:
        return
    assert coerce(once, declared) == once


def test_invalid_values_rejected():
    with pytest.raises(ValueError):
        DataValue.integer(2**63)
    with pytest.raises(ValueError):
        DataValue.double(float("nan"))
