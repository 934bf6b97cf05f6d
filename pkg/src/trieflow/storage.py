"""Immutable columnar tries.

A trie over ``k`` attributes keeps one :class:`ColumnLayer` per attribute.
Layer ``i`` holds a sorted data column; for every entry it also records where
its children start in layer ``i + 1`` (``starts`` has one extra trailing
offset, so the children of entry ``j`` are ``starts[j]:starts[j + 1]``).

Tries store integer value ids.  Ids produced by a sorted
:class:`~trieflow.values.Dictionary` compare like the values they stand for,
so trie order is value order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ArityError, OrderMismatchError

ID_DTYPE = np.int64


@dataclass(frozen=True, eq=False)
class ColumnLayer:
    data: np.ndarray
    starts: np.ndarray | None  # None on the last layer


class Trie:
    """Sorted, duplicate-free relation in columnar trie form.

    ``order`` names, for each trie level, the relation column stored there.
    Build tries with :func:`trie_from_tuples`; they are never mutated.
    """

    __slots__ = ("order", "layers", "row_count", "_lists")

    def __init__(self, order: tuple[int, ...], layers: tuple[ColumnLayer, ...], row_count: int):
        self.order = order
        self.layers = layers
        self.row_count = row_count
        self._lists = None

    @property
    def arity(self) -> int:
        return len(self.order)

    def __len__(self) -> int:
        return self.row_count

    def __repr__(self) -> str:
        return f"Trie(order={self.order}, rows={self.row_count})"

    def lists(self) -> list[tuple[list, list | None]]:
        """Layers as plain Python lists, cached; used by the join iterators."""
        if self._lists is None:
            self._lists = [
                (layer.data.tolist(), None if layer.starts is None else layer.starts.tolist())
                for layer in self.layers
            ]
        return self._lists

    def to_array(self) -> np.ndarray:
        """All rows as an ``(n, arity)`` array, columns in trie order."""
        n, k = self.row_count, self.arity
        if k == 0 or n == 0:
            return np.empty((n, k), dtype=ID_DTYPE)
        out = np.empty((n, k), dtype=ID_DTYPE)
        # expand each level down to leaf granularity
        leaf_counts = None
        for level in range(k - 1, -1, -1):
            layer = self.layers[level]
            if level == k - 1:
                leaf_counts = np.ones(len(layer.data), dtype=ID_DTYPE)
            else:
                prefix = np.concatenate(([0], np.cumsum(leaf_counts)))
                leaf_counts = prefix[layer.starts[1:]] - prefix[layer.starts[:-1]]
            out[:, level] = np.repeat(layer.data, leaf_counts)
        return out

    def to_relation_array(self) -> np.ndarray:
        """Rows with columns in the relation's own column order."""
        arr = self.to_array()
        if self.order == tuple(range(self.arity)):
            return arr
        out = np.empty_like(arr)
        out[:, list(self.order)] = arr
        return out

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        """Rows in increasing lexicographic order (trie attribute order)."""
        if self.arity == 0:
            if self.row_count:
                yield ()
            return
        yield from map(tuple, self.to_array().tolist())

    def prefix_range(self, prefix: Sequence[int]) -> tuple[int, int] | None:
        """Index range in layer ``len(prefix)`` below ``prefix`` or None if absent."""
        lo, hi = 0, len(self.layers[0].data) if self.layers else 0
        for level, key in enumerate(prefix):
            data = self.layers[level].data
            pos = int(np.searchsorted(data[lo:hi], key)) + lo
            if pos >= hi or data[pos] != key:
                return None
            if level + 1 == self.arity:
                return pos, pos + 1
            starts = self.layers[level].starts
            lo, hi = int(starts[pos]), int(starts[pos + 1])
        return lo, hi


def _packing(k: int, *arrays: np.ndarray) -> list[int] | None:
    """Bit widths that pack a k-column row into one order-preserving int64.

    None when the ids are too large (or negative) to fit in 63 bits.
    """
    if k < 2:
        return None
    highs = np.zeros(k, dtype=np.int64)
    for arr in arrays:
        if len(arr):
            if arr.min() < 0:
                return None
            np.maximum(highs, arr.max(axis=0), out=highs)
    widths = [max(int(h).bit_length(), 1) for h in highs]
    return widths if sum(widths) <= 63 else None


def _pack(rows: np.ndarray, widths: list[int]) -> np.ndarray:
    key = rows[:, 0].astype(np.int64)
    for j in range(1, len(widths)):
        key = (key << widths[j]) | rows[:, j]
    return key


def _unpack(keys: np.ndarray, widths: list[int]) -> np.ndarray:
    out = np.empty((len(keys), len(widths)), dtype=ID_DTYPE)
    for j in range(len(widths) - 1, -1, -1):
        out[:, j] = keys & ((1 << widths[j]) - 1)
        keys = keys >> widths[j]
    return out


def _sorted_unique(rows: np.ndarray) -> np.ndarray:
    n, k = rows.shape
    if n <= 1 or k == 0:
        return rows[:1] if k == 0 else rows
    if k == 1:
        return np.unique(rows[:, 0]).reshape(-1, 1).astype(ID_DTYPE, copy=False)
    widths = _packing(k, rows)
    if widths is not None:
        return _unpack(np.unique(_pack(rows, widths)), widths)
    perm = np.lexsort(rows.T[::-1])
    rows = rows[perm]
    keep = np.empty(n, dtype=bool)
    keep[0] = True
    np.any(rows[1:] != rows[:-1], axis=1, out=keep[1:])
    return rows[keep]


def _as_rows(tuples, arity: int | None) -> np.ndarray:
    if isinstance(tuples, np.ndarray):
        rows = tuples
        if rows.ndim != 2:
            if rows.size == 0 and arity is not None:
                return np.empty((0, arity), dtype=ID_DTYPE)
            raise ArityError("expected a two-dimensional array of rows")
    else:
        tuples = list(tuples)
        if not tuples:
            if arity is None:
                raise ArityError("cannot infer the arity of an empty relation")
            return np.empty((0, arity), dtype=ID_DTYPE)
        width = len(tuples[0])
        if any(len(t) != width for t in tuples):
            raise ArityError("rows have different lengths")
        if width == 0:
            return np.empty((len(tuples), 0), dtype=ID_DTYPE)
        rows = np.asarray(tuples, dtype=ID_DTYPE)
    if arity is not None and rows.shape[1] != arity:
        raise ArityError(f"rows have {rows.shape[1]} columns, expected {arity}")
    return rows.astype(ID_DTYPE, copy=False)


def _build_sorted(rows: np.ndarray, order: tuple[int, ...]) -> Trie:
    """Build from rows already sorted, unique and in trie column order."""
    n, k = rows.shape
    if k == 0:
        return Trie(order, (), min(n, 1))
    if n == 0:
        layers = tuple(
            ColumnLayer(np.empty(0, ID_DTYPE), None if i == k - 1 else np.zeros(1, ID_DTYPE))
            for i in range(k)
        )
        return Trie(order, layers, 0)
    # new_node[i][r]: row r opens a new node at level i
    new_node = []
    changed = np.zeros(n, dtype=bool)
    changed[0] = True
    for i in range(k):
        col_change = np.empty(n, dtype=bool)
        col_change[0] = True
        np.not_equal(rows[1:, i], rows[:-1, i], out=col_change[1:])
        changed = changed | col_change
        new_node.append(changed.copy())
    layers = []
    for i in range(k):
        data = rows[new_node[i], i]
        if i == k - 1:
            layers.append(ColumnLayer(data, None))
            continue
        child_ids = np.cumsum(new_node[i + 1]) - 1
        starts = np.empty(len(data) + 1, dtype=ID_DTYPE)
        starts[:-1] = child_ids[new_node[i]]
        starts[-1] = int(new_node[i + 1].sum())
        layers.append(ColumnLayer(data, starts))
    return Trie(order, tuple(layers), n)


def trie_from_tuples(tuples, order: Sequence[int] | None = None, *, arity: int | None = None) -> Trie:
    """Build a trie from rows of ids.

    ``order`` is a permutation of the relation's columns; level ``i`` of the
    result stores column ``order[i]``.  Duplicate rows are collapsed.
    """
    if order is not None:
        order = tuple(int(o) for o in order)
        if arity is None:
            arity = len(order)
    rows = _as_rows(tuples, arity)
    k = rows.shape[1]
    if order is None:
        order = tuple(range(k))
    if sorted(order) != list(range(k)):
        raise ArityError(f"order {order} is not a permutation of {k} columns")
    if order != tuple(range(k)):
        rows = rows[:, list(order)]
    return _build_sorted(_sorted_unique(rows), order)


def reorder(trie: Trie, order: Sequence[int]) -> Trie:
    """The same relation under another attribute order."""
    order = tuple(order)
    if order == trie.order:
        return trie
    return trie_from_tuples(trie.to_relation_array(), order)


def _check_compatible(a: Trie, b: Trie) -> None:
    if a.arity != b.arity:
        raise ArityError(f"arity mismatch: {a.arity} vs {b.arity}")
    if a.order != b.order:
        raise OrderMismatchError(f"attribute orders differ: {a.order} vs {b.order}")


def _difference_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rows of sorted-unique ``a`` not in sorted-unique ``b``; result stays sorted."""
    if len(a) == 0 or len(b) == 0:
        return a
    return a[~member_mask(b, a)]


def member_mask(haystack: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """For each query row, whether it occurs in ``haystack`` (any row order)."""
    nq = len(queries)
    if nq == 0 or len(haystack) == 0:
        return np.zeros(nq, dtype=bool)
    k = queries.shape[1]
    if k == 0:
        return np.ones(nq, dtype=bool)
    if k == 1:
        return np.isin(queries[:, 0], haystack[:, 0])
    widths = _packing(k, haystack, queries)
    if widths is not None:
        return np.isin(_pack(queries, widths), _pack(haystack, widths))
    combined = np.concatenate((haystack, queries))
    tag = np.concatenate((np.zeros(len(haystack), ID_DTYPE), np.ones(nq, ID_DTYPE)))
    # tag is the last (least significant) key, so haystack rows lead each group
    perm = np.lexsort((tag,) + tuple(combined.T[::-1]))
    srt = combined[perm]
    boundary = np.empty(len(srt), dtype=bool)
    boundary[0] = True
    np.any(srt[1:] != srt[:-1], axis=1, out=boundary[1:])
    group = np.cumsum(boundary) - 1
    group_has_hay = tag[perm][boundary] == 0
    hit = group_has_hay[group]
    out = np.empty(nq, dtype=bool)
    is_query = tag[perm] == 1
    out[perm[is_query] - len(haystack)] = hit[is_query]
    return out


def difference(a: Trie, b: Trie) -> Trie:
    """Rows of ``a`` that are not in ``b``."""
    _check_compatible(a, b)
    if a.row_count == 0 or b.row_count == 0:
        return a
    if a.arity == 0:
        return Trie(a.order, (), 0)
    return _build_sorted(_difference_rows(a.to_array(), b.to_array()), a.order)


def union(a: Trie, b: Trie) -> Trie:
    """Set union of two tries with the same attribute order."""
    _check_compatible(a, b)
    if b.row_count == 0:
        return a
    if a.row_count == 0:
        return b
    if a.arity == 0:
        return a
    return _build_sorted(_sorted_unique(np.concatenate((a.to_array(), b.to_array()))), a.order)


def validate_trie(trie: Trie) -> list[str]:
    """Structural problems of a trie (empty list when well formed)."""
    problems = []
    k = trie.arity
    if len(trie.layers) != k:
        return [f"{len(trie.layers)} layers for arity {k}"]
    if k == 0:
        return [] if trie.row_count in (0, 1) else ["arity-0 trie with more than one row"]
    intervals = [(0, len(trie.layers[0].data))]
    for level, layer in enumerate(trie.layers):
        data = layer.data
        for lo, hi in intervals:
            seg = data[lo:hi]
            if len(seg) > 1 and not np.all(seg[1:] > seg[:-1]):
                problems.append(f"level {level}: interval {lo}:{hi} not strictly increasing")
            if hi <= lo and level > 0:
                problems.append(f"level {level}: empty child interval at {lo}")
        covered = sum(hi - lo for lo, hi in intervals)
        if covered != len(data) or (intervals and (intervals[0][0] != 0 or intervals[-1][1] != len(data))):
            problems.append(f"level {level}: intervals do not cover the data column")
        for (_, h1), (l2, _) in zip(intervals, intervals[1:]):
            if h1 != l2:
                problems.append(f"level {level}: intervals leave a gap or overlap at {h1}/{l2}")
        if level == k - 1:
            if layer.starts is not None:
                problems.append("last layer has interval starts")
            if len(data) != trie.row_count:
                problems.append("row count does not match the leaf layer")
            break
        starts = layer.starts
        if starts is None or len(starts) != len(data) + 1:
            problems.append(f"level {level}: starts column has wrong length")
            break
        intervals = [(int(starts[j]), int(starts[j + 1])) for j in range(len(data))]
    return problems


class Relation:
    """A set of id rows plus tries of it, built on demand and cached per order."""

    __slots__ = ("arity", "rows", "_tries")

    def __init__(self, arity: int, rows=None, *, canonical: bool = False):
        self.arity = arity
        if rows is None:
            rows = np.empty((0, arity), dtype=ID_DTYPE)
        else:
            rows = _as_rows(rows, arity)
            if not canonical:
                rows = _sorted_unique(rows)
        self.rows = rows
        self._tries: dict[tuple[int, ...], Trie] = {}

    @classmethod
    def from_trie(cls, trie: Trie) -> "Relation":
        rel = cls(trie.arity, trie.to_relation_array(), canonical=trie.order == tuple(range(trie.arity)))
        rel._tries[trie.order] = trie
        return rel

    def __len__(self) -> int:
        return len(self.rows)

    def __repr__(self) -> str:
        return f"Relation(arity={self.arity}, rows={len(self.rows)})"

    def trie(self, order: Sequence[int] | None = None) -> Trie:
        order = tuple(range(self.arity)) if order is None else tuple(order)
        cached = self._tries.get(order)
        if cached is None:
            if order == tuple(range(self.arity)):
                cached = _build_sorted(self.rows, order)
            else:
                cached = trie_from_tuples(self.rows, order)
            self._tries[order] = cached
        return cached

    def union(self, other: "Relation") -> "Relation":
        if len(other) == 0:
            return self
        if len(self) == 0:
            return other
        return Relation(self.arity, np.concatenate((self.rows, other.rows)))

    def difference(self, other: "Relation") -> "Relation":
        if len(other) == 0 or len(self) == 0:
            return self
        return Relation(self.arity, _difference_rows(self.rows, other.rows), canonical=True)

    def contains(self, rows: np.ndarray) -> np.ndarray:
        return member_mask(self.rows, rows)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return map(tuple, self.rows.tolist())


def relation_from_tuples(arity: int, tuples: Iterable[Sequence[int]]) -> Relation:
    return Relation(arity, list(tuples) if not isinstance(tuples, np.ndarray) else tuples)
