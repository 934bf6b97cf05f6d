"""Fact loaders (CSV, TSV, N-Triples, fact files) and result exporters.

Files ending in ``.gz`` are decompressed on the fly.  Loaders abort on the
first bad row instead of skipping it, so fact counts are never silently
wrong.

CSV/TSV fields in ``any`` positions load as plain strings, except fields
written in explicit term syntax (``<iri>``, ``"text"@lang``,
``"lexical"^^<datatype>``), which is also what the exporter writes for
values that would otherwise be ambiguous.
"""

from __future__ import annotations

import csv
import gzip
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import CoercionError, DataError, ParseError
from .parser import Program, SourceDirective, parse_program, typed_literal
from .storage import Relation, Trie
from .values import XSD, DataValue, Dictionary, PositionType, Sort, TypeDeclaration, coerce

BNODE_PREFIX = "urn:trieflow:bnode:"
FORMATS = ("csv", "tsv", "ntriples", "facts")
EXTENSIONS = {"csv": "csv", "ntriples": "nt"}


@dataclass(frozen=True)
class SourceSpec:
    predicate: str
    arity: int
    format: str
    path: str
    gzip: bool = False

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown source format {self.format!r}")
        if self.format == "ntriples" and self.arity != 3:
            raise ValueError("N-Triples sources have arity 3")

    @classmethod
    def of(cls, predicate: str, arity: int, fmt: str, path) -> "SourceSpec":
        path = str(path)
        return cls(predicate, arity, fmt, path, path.endswith(".gz"))

    @classmethod
    def from_directive(cls, directive: SourceDirective, base_dir=None) -> "SourceSpec":
        path = Path(directive.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return cls.of(directive.predicate, directive.arity, directive.format, path)


def open_text(path, gzipped: bool | None = None):
    path = str(path)
    if gzipped is None:
        gzipped = path.endswith(".gz")
    try:
        if gzipped:
            return gzip.open(path, "rt", encoding="utf-8", newline="")
        return open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror or exc}") from exc


def _declared_types(spec: SourceSpec, decl: TypeDeclaration | None) -> tuple[PositionType, ...]:
    if decl is None:
        return (PositionType.ANY,) * spec.arity
    if decl.arity != spec.arity:
        raise DataError(f"source for {spec.predicate} has arity {spec.arity} but is declared with {decl.arity}")
    return decl.types


# ------------------------------------------------------------- term syntax

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))", re.S)


def _unescape(text: str) -> str:
    if "\\" not in text:
        return text

    def repl(m):
        hexdigits = m.group(1) or m.group(2)
        if hexdigits:
            return chr(int(hexdigits, 16))
        ch = m.group(3)
        if ch not in _ESCAPES:
            raise ValueError(f"invalid escape \\{ch}")
        return _ESCAPES[ch]

    return _ESCAPE_RE.sub(repl, text)


_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")
_IRI_UNSAFE = re.compile(r'[\x00-\x20<>"{}|^`\\\x7f]|\s')


def _uchar(m) -> str:
    return f"\\u{ord(m.group()):04X}"


def _escape(text: str) -> str:
    text = (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))
    return _CONTROL.sub(_uchar, text)


def _escape_iri(text: str) -> str:
    return _IRI_UNSAFE.sub(_uchar, text)


_LITERAL = r'"((?:[^"\\\n\r]|\\.)*)"(?:@([A-Za-z]+(?:-[A-Za-z0-9]+)*)|\^\^<([^<>\s]*)>)?'
_LITERAL_RE = re.compile(_LITERAL)
_IRI_TERM = re.compile(r"<([^<>\"{}|^`\s]*)>")


def _literal_value(body: str, lang: str | None, datatype: str | None) -> DataValue:
    text = _unescape(body)
    if lang:
        return DataValue.lang_string(text, lang)
    if datatype:
        return typed_literal(text, _unescape(datatype))
    return DataValue.string(text)


def parse_any_field(text: str) -> DataValue:
    """Value of a CSV/TSV field in an ``any`` position."""
    if text.startswith("<") and text.endswith(">"):
        m = _IRI_TERM.fullmatch(text)
        if m:
            return DataValue.iri(_unescape(m.group(1)))
    elif text.startswith('"'):
        m = _LITERAL_RE.fullmatch(text)
        if m:
            try:
                return _literal_value(*m.groups())
            except ValueError:
                pass
    return DataValue.string(text)


def _needs_term_syntax(text: str) -> bool:
    # a bare \r or control character would not survive the CSV reader
    if "\r" in text or _CONTROL.search(text):
        return True
    return parse_any_field(text) != DataValue.string(text)


def format_field(value: DataValue, nulls: "NullNamer | None" = None) -> str:
    """Text written to a CSV field for ``value``; inverse of loading."""
    sort = value.sort
    if sort is Sort.STRING:
        if _needs_term_syntax(value.value):
            return f'"{_escape(value.value)}"^^<{XSD}string>'
        return value.value
    if sort is Sort.INTEGER:
        return str(value.value)
    if sort is Sort.DOUBLE:
        return repr(value.value)
    if sort is Sort.IRI:
        return f"<{_escape_iri(value.value)}>"
    if sort is Sort.LANG_STRING:
        return f'"{_escape(value.value)}"@{value.lang}'
    return _null_text(value, nulls)


def _null_text(value: DataValue, nulls: "NullNamer | None") -> str:
    label = nulls.name(value.value) if nulls is not None else value.value
    return f"_:n{label}"


class NullNamer:
    """Renames nulls by order of first appearance so exports are stable."""

    def __init__(self):
        self._names: dict[int, int] = {}

    def name(self, label: int) -> int:
        found = self._names.get(label)
        if found is None:
            found = self._names[label] = len(self._names)
        return found


# -------------------------------------------------------------- CSV / TSV

def _field_value(text: str, declared: PositionType, spec: SourceSpec, position: int, line: int) -> DataValue:
    if declared is PositionType.ANY:
        return parse_any_field(text)
    return coerce(DataValue.string(text), declared, predicate=spec.predicate, position=position, line=line)


def iter_csv(spec: SourceSpec, decl: TypeDeclaration | None = None) -> Iterator[tuple[DataValue, ...]]:
    types = _declared_types(spec, decl)
    arity = spec.arity
    with open_text(spec.path, spec.gzip) as handle:
        if spec.format == "tsv":
            rows = ((n, line.rstrip("\r\n").split("\t")) for n, line in enumerate(handle, 1))
        else:
            reader = csv.reader(handle, strict=True)
            rows = _numbered(reader)
        try:
            for line, fields in rows:
                if len(fields) != arity:
                    raise DataError(
                        f"{spec.path}: row at line {line} has {len(fields)} fields, "
                        f"expected {arity} for {spec.predicate}")
                yield tuple(_field_value(f, types[i], spec, i, line) for i, f in enumerate(fields))
        except csv.Error as exc:
            raise DataError(f"{spec.path}: malformed CSV: {exc}") from exc
        except (OSError, EOFError, UnicodeDecodeError) as exc:
            raise DataError(f"{spec.path}: read error: {exc}") from exc


def _numbered(reader) -> Iterator[tuple[int, list[str]]]:
    start = 1
    for fields in reader:
        yield start, fields
        start = reader.line_num + 1


def load_csv(spec: SourceSpec, decl: TypeDeclaration | None = None) -> list[tuple[DataValue, ...]]:
    """All rows of a CSV (or TSV) source, coerced per the declaration."""
    return list(iter_csv(spec, decl))


# -------------------------------------------------------------- N-Triples

_NT_SUBJECT = re.compile(r"[ \t]*(?:<([^<>\"{}|^`\s]*)>|_:([A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?))")
_NT_PREDICATE = re.compile(r"[ \t]*<([^<>\"{}|^`\s]*)>")
_NT_OBJECT = re.compile(r"[ \t]*(?:<([^<>\"{}|^`\s]*)>|_:([A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)|"
                        + _LITERAL + ")")
_NT_END = re.compile(r"[ \t]*\.[ \t]*(?:#.*)?")
_NT_BLANK = re.compile(r"[ \t]*(?:#.*)?")


def parse_ntriples_line(text: str, line: int = 1, source: str | None = None) -> tuple[DataValue, ...] | None:
    """One N-Triples line as a triple; None for blank and comment lines."""
    text = text.rstrip("\r\n")
    if _NT_BLANK.fullmatch(text):
        return None

    def fail(pos: int, what: str):
        return ParseError(what, line, pos + 1, source)

    m = _NT_SUBJECT.match(text)
    if not m:
        raise fail(0, "expected an IRI or blank node subject")
    subject = DataValue.iri(_unescape(m.group(1)) if m.group(1) is not None else BNODE_PREFIX + m.group(2))
    pos = m.end()
    m = _NT_PREDICATE.match(text, pos)
    if not m:
        raise fail(pos, "expected an IRI predicate")
    predicate = DataValue.iri(_unescape(m.group(1)))
    pos = m.end()
    m = _NT_OBJECT.match(text, pos)
    if not m:
        raise fail(pos, "expected an object term")
    iri, bnode, body, lang, datatype = m.groups()
    try:
        if iri is not None:
            obj = DataValue.iri(_unescape(iri))
        elif bnode is not None:
            obj = DataValue.iri(BNODE_PREFIX + bnode)
        else:
            obj = _literal_value(body, lang, datatype)
    except ValueError as exc:
        raise fail(pos, str(exc)) from None
    pos = m.end()
    if not _NT_END.fullmatch(text, pos):
        raise fail(pos, "expected '.' ending the triple")
    return subject, predicate, obj


def iter_ntriples(spec: SourceSpec, decl: TypeDeclaration | None = None) -> Iterator[tuple[DataValue, ...]]:
    types = _declared_types(spec, decl)
    with open_text(spec.path, spec.gzip) as handle:
        for n, text in enumerate(handle, 1):
            triple = parse_ntriples_line(text, n, spec.path)
            if triple is None:
                continue
            yield tuple(
                v if t is PositionType.ANY else coerce(v, t, predicate=spec.predicate, position=i, line=n)
                for i, (v, t) in enumerate(zip(triple, types))
            )


def load_ntriples(spec: SourceSpec, decl: TypeDeclaration | None = None) -> list[tuple[DataValue, ...]]:
    return list(iter_ntriples(spec, decl))


# ------------------------------------------------------------- fact files

def load_facts(spec: SourceSpec, decl: TypeDeclaration | None = None) -> list[tuple[DataValue, ...]]:
    """Ground atoms ``p(c1, ..., cn) .`` of the source's predicate."""
    types = _declared_types(spec, decl)
    with open_text(spec.path, spec.gzip) as handle:
        text = handle.read()
    program = parse_program(text, source=spec.path, validate=False)
    if program.rules or program.declarations or program.sources:
        raise DataError(f"{spec.path}: fact files may only contain facts")
    rows = []
    for n, fact in enumerate(program.facts, 1):
        if fact.predicate != spec.predicate:
            raise DataError(f"{spec.path}: fact {n} is about {fact.predicate}, expected {spec.predicate}")
        if fact.arity != spec.arity:
            raise DataError(f"{spec.path}: fact {n} has arity {fact.arity}, expected {spec.arity}")
        if not fact.is_ground():
            raise DataError(f"{spec.path}: fact {n} ({fact}) is not ground")
        rows.append(tuple(
            v if t is PositionType.ANY else coerce(v, t, predicate=spec.predicate, position=i, line=n)
            for i, (v, t) in enumerate(zip(fact.terms, types))
        ))
    return rows


def iter_source(spec: SourceSpec, decl: TypeDeclaration | None = None) -> Iterator[tuple[DataValue, ...]]:
    if spec.format in ("csv", "tsv"):
        return iter_csv(spec, decl)
    if spec.format == "ntriples":
        return iter_ntriples(spec, decl)
    return iter(load_facts(spec, decl))


def load_source(spec: SourceSpec, decl: TypeDeclaration | None = None) -> list[tuple[DataValue, ...]]:
    return list(iter_source(spec, decl))


def program_sources(program: Program, base_dir=None) -> list[SourceSpec]:
    return [SourceSpec.from_directive(d, base_dir) for d in program.sources]


# ---------------------------------------------------------------- export

def _arity_of(data) -> int | None:
    if isinstance(data, (Relation, Trie)):
        return data.arity
    return None


def _rows_of(data) -> list[list[int]]:
    if isinstance(data, Relation):
        return data.rows.tolist()
    if isinstance(data, Trie):
        arr = data.to_array()
        if data.order != tuple(range(data.arity)):
            inverse = [data.order.index(c) for c in range(data.arity)]
            arr = arr[:, inverse]
        return arr.tolist()
    return [list(r) for r in data]


def format_nt_term(value: DataValue, nulls: NullNamer | None = None) -> str:
    sort = value.sort
    if sort is Sort.IRI:
        if value.value.startswith(BNODE_PREFIX):
            return "_:" + value.value[len(BNODE_PREFIX):]
        return f"<{_escape_iri(value.value)}>"
    if sort is Sort.STRING:
        return f'"{_escape(value.value)}"'
    if sort is Sort.LANG_STRING:
        return f'"{_escape(value.value)}"@{value.lang}'
    if sort is Sort.INTEGER:
        return f'"{value.value}"^^<{XSD}integer>'
    if sort is Sort.DOUBLE:
        return f'"{value.value!r}"^^<{XSD}double>'
    return _null_text(value, nulls)


def export(predicate: str, data, fmt: str, path, dictionary: Dictionary, *,
           overwrite: bool = False, nulls: NullNamer | None = None) -> int:
    """Write the facts of one predicate; returns the number of rows written.

    ``data`` is a Trie or Relation of value ids; rows are written in the
    trie's enumeration order.
    """
    path = Path(path)
    if fmt not in EXTENSIONS:
        raise ValueError(f"unsupported export format {fmt!r}")
    if path.exists() and not overwrite:
        raise DataError(f"refusing to overwrite {path} (pass overwrite=True)")
    nulls = NullNamer() if nulls is None else nulls
    values = dictionary.values
    rows = _rows_of(data)
    arity = _arity_of(data)
    if arity is None and rows:
        arity = len(rows[0])
    if fmt == "ntriples" and arity not in (None, 3):
        raise DataError(f"cannot export {predicate} as N-Triples: arity is {arity}, not 3")
    try:
        if fmt == "csv":
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                for row in rows:
                    writer.writerow([format_field(values[i], nulls) for i in row])
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                for s, p, o in rows:
                    handle.write(f"{format_nt_term(values[s], nulls)} {format_nt_term(values[p], nulls)} "
                                 f"{format_nt_term(values[o], nulls)} .\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return len(rows)


def export_name(predicate: str, fmt: str) -> str:
    return f"{predicate}.{EXTENSIONS[fmt]}"


def ensure_directory(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create export directory {path}: {exc.strerror or exc}") from exc
    return path


__all__ = [
    "SourceSpec", "NullNamer", "load_csv", "load_ntriples", "load_facts", "load_source",
    "iter_source", "export", "format_field", "parse_any_field", "parse_ntriples_line",
    "CoercionError",
]
