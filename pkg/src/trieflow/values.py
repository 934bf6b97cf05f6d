"""Ground values, the value dictionary and type coercion.

Every value handled by the engine is a :class:`DataValue`.  Relations never
store values directly; they store dense integer ids handed out by a
:class:`Dictionary`.
"""

from __future__ import annotations

import enum
import math
import re
import threading
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import CoercionError, UnknownIdError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

XSD = "http://www.w3.org/2001/XMLSchema#"


class Sort(enum.IntEnum):
    # numeric value is the cross-sort rank used by ``compare``
    IRI = 0
    STRING = 1
    LANG_STRING = 2
    INTEGER = 3
    DOUBLE = 4
    NULL = 5


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True, slots=True)
class DataValue:
    """A typed ground value.

    ``value`` holds the text (IRI, strings), a Python ``int`` (integers and
    null labels) or a ``float``.  ``lang`` is only set for language-tagged
    strings.
    """

    sort: Sort
    value: Union[str, int, float]
    lang: str | None = None

    @classmethod
    def iri(cls, text: str) -> "DataValue":
        return cls(Sort.IRI, text)

    @classmethod
    def string(cls, text: str) -> "DataValue":
        return cls(Sort.STRING, text)

    @classmethod
    def lang_string(cls, text: str, lang: str) -> "DataValue":
        return cls(Sort.LANG_STRING, text, lang)

    @classmethod
    def integer(cls, number: int) -> "DataValue":
        number = int(number)
        if not INT64_MIN <= number <= INT64_MAX:
            raise ValueError(f"integer {number} does not fit in 64 bits")
        return cls(Sort.INTEGER, number)

    @classmethod
    def double(cls, number: float) -> "DataValue":
        number = float(number)
        if math.isnan(number):
            raise ValueError("NaN is not a valid value")
        return cls(Sort.DOUBLE, number)

    @classmethod
    def null(cls, label: int) -> "DataValue":
        if label < 0:
            raise ValueError("null labels are non-negative")
        return cls(Sort.NULL, int(label))

    @property
    def is_numeric(self) -> bool:
        return self.sort is Sort.INTEGER or self.sort is Sort.DOUBLE

    @property
    def is_textual(self) -> bool:
        return self.sort is Sort.STRING or self.sort is Sort.LANG_STRING

    def sort_key(self):
        if self.sort is Sort.LANG_STRING:
            return (int(self.sort), self.lang, self.value)
        return (int(self.sort), self.value)

    def __lt__(self, other: "DataValue") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "DataValue") -> bool:
        return self.sort_key() <= other.sort_key()

    def __gt__(self, other: "DataValue") -> bool:
        return self.sort_key() > other.sort_key()

    def __ge__(self, other: "DataValue") -> bool:
        return self.sort_key() >= other.sort_key()

    def __str__(self) -> str:
        if self.sort is Sort.IRI:
            return f"<{self.value}>"
        if self.sort is Sort.STRING:
            return f'"{self.value}"'
        if self.sort is Sort.LANG_STRING:
            return f'"{self.value}"@{self.lang}'
        if self.sort is Sort.NULL:
            return f"_:n{self.value}"
        return repr(self.value)


def compare(a: DataValue, b: DataValue) -> Ordering:
    """Total order over all values.

    Sorts rank IRI < String < LangString < Integer < Double < Null.  Within a
    sort, text compares by code point (language strings by tag first), numbers
    and null labels numerically.  Integers and doubles are *not* compared
    with each other numerically here.
    """
    ka, kb = a.sort_key(), b.sort_key()
    if ka < kb:
        return Ordering.LESS
    if ka > kb:
        return Ordering.GREATER
    return Ordering.EQUAL


class Dictionary:
    """Bijection between values and dense ids, assigned in first-seen order.

    Lookups are lock-free; interning a value not seen before takes a lock so
    there is only ever one writer.
    """

    def __init__(self, values=()):
        self._ids: dict[DataValue, int] = {}
        self._values: list[DataValue] = []
        self._lock = threading.Lock()
        for v in values:
            self.intern(v)

    def intern(self, value: DataValue) -> int:
        found = self._ids.get(value)
        if found is not None:
            return found
        with self._lock:
            found = self._ids.get(value)
            if found is None:
                found = len(self._values)
                self._values.append(value)
                self._ids[value] = found
            return found

    def resolve(self, value_id: int) -> DataValue:
        if value_id < 0:
            raise UnknownIdError(value_id)
        try:
            return self._values[value_id]
        except (IndexError, TypeError):
            raise UnknownIdError(value_id) from None

    def lookup(self, value: DataValue) -> int | None:
        return self._ids.get(value)

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, value) -> bool:
        return value in self._ids

    @property
    def values(self) -> list[DataValue]:
        """Read-only view of the id -> value table (index = id)."""
        return self._values

    def sorted_copy(self) -> tuple["Dictionary", np.ndarray]:
        """Return a dictionary holding the same values with ids in value order.

        The second element maps old ids to new ids.  Once a dictionary is
        sorted, comparing ids is the same as comparing values, as long as the
        only values added afterwards are nulls with increasing labels.
        """
        order = sorted(range(len(self._values)), key=lambda i: self._values[i].sort_key())
        fresh = Dictionary()
        remap = np.empty(len(self._values), dtype=np.int64)
        for new_id, old_id in enumerate(order):
            fresh._values.append(self._values[old_id])
            fresh._ids[self._values[old_id]] = new_id
            remap[old_id] = new_id
        return fresh, remap


class PositionType(enum.Enum):
    ANY = "any"
    INTEGER = "integer"
    DOUBLE = "double"
    STRING = "string"

    @classmethod
    def parse(cls, name: str) -> "PositionType":
        lowered = name.lower()
        if lowered == "float":
            return cls.DOUBLE
        try:
            return cls(lowered)
        except ValueError:
            raise ValueError(f"unknown datatype {name!r}") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TypeDeclaration:
    predicate: str
    types: tuple[PositionType, ...]

    def __post_init__(self):
        if len(self.types) < 1:
            raise ValueError("a declaration needs at least one position")

    @property
    def arity(self) -> int:
        return len(self.types)

    @classmethod
    def default(cls, predicate: str, arity: int) -> "TypeDeclaration":
        return cls(predicate, (PositionType.ANY,) * arity)


_INTEGER_TEXT = re.compile(r"[+-]?[0-9]+")
_DOUBLE_TEXT = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_INFINITY_TEXT = re.compile(r"[+-]?(?:inf|INF|Infinity)")


def coerce(value: DataValue, declared: PositionType, *, predicate=None, position=None, line=None) -> DataValue:
    """Convert a value read from input to the type declared for its position."""

    def fail():
        return CoercionError(value, declared, predicate, position, line)

    if value.sort is Sort.NULL:
        raise fail()
    if declared is PositionType.ANY:
        return value
    if declared is PositionType.STRING:
        if value.is_textual:
            return value
        raise fail()
    if declared is PositionType.INTEGER:
        if value.sort is Sort.INTEGER:
            return value
        if value.sort is Sort.STRING:
            text = value.value.strip()
            if _INTEGER_TEXT.fullmatch(text):
                number = int(text)
                if INT64_MIN <= number <= INT64_MAX:
                    return DataValue(Sort.INTEGER, number)
        raise fail()
    # double
    if value.sort is Sort.DOUBLE:
        return value
    if value.sort is Sort.INTEGER:
        return DataValue(Sort.DOUBLE, float(value.value))
    if value.sort is Sort.STRING:
        text = value.value.strip()
        if _DOUBLE_TEXT.fullmatch(text):
            number = float(text)
            if math.isfinite(number):
                return DataValue(Sort.DOUBLE, number)
        elif _INFINITY_TEXT.fullmatch(text):
            return DataValue(Sort.DOUBLE, float(text.lower().replace("infinity", "inf")))
    raise fail()
