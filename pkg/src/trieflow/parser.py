"""Reader, validator and pretty-printer for rule programs (``.rls`` files).

Grammar summary::

    program    := statement*
    statement  := declare | source | fact | rule
    declare    := "@declare" NAME "(" TYPE ("," TYPE)* ")" "."
    source     := "@source" NAME "[" INT "]" ":" LOADER "(" STRING ")" "."
    fact       := atom "."
    rule       := atom ("," atom)* ":-" literal ("," literal)* "."
    literal    := atom | "~" atom | term OP term
    term       := "?"NAME | "!"NAME | constant

``%`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import ParseError, ValidationError
from .values import XSD, DataValue, PositionType, Sort, TypeDeclaration

NAME = r"[A-Za-z][A-Za-z0-9_-]*"
_NAME_RE = re.compile(NAME)
_VARNAME_RE = re.compile(r"[A-Za-z0-9_]+")
_DOUBLE_RE = re.compile(r"-?[0-9]+(?:\.[0-9]+(?:[eE][+-]?[0-9]+)?|[eE][+-]?[0-9]+)")
_INTEGER_RE = re.compile(r"-?[0-9]+")
_IRI_RE = re.compile(r'<([^<>"{}|^`\\\s]*)>')
_LANG_RE = re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)")
_OPERATOR_RE = re.compile(r"!=|<=|>=|=|<|>")

LOADERS = {
    "load-csv": "csv",
    "load-tsv": "tsv",
    "load-rdf": "ntriples",
    "load-ntriples": "ntriples",
    "load-facts": "facts",
}
_LOADER_NAMES = {fmt: name for name, fmt in reversed(list(LOADERS.items()))}

INTEGER_DATATYPES = {XSD + t for t in ("integer", "int", "long", "short", "byte",
                                         "nonNegativeInteger", "positiveInteger",
                                         "negativeInteger", "nonPositiveInteger")}
DOUBLE_DATATYPES = {XSD + t for t in ("double", "decimal", "float")}


@dataclass(frozen=True)
class Variable:
    name: str
    existential: bool = False

    def __str__(self) -> str:
        return ("!" if self.existential else "?") + self.name


Term = Union[Variable, DataValue]


@dataclass(frozen=True)
class Atom:
    predicate: str
    terms: tuple

    @property
    def arity(self) -> int:
        return len(self.terms)

    def variables(self) -> list[Variable]:
        return [t for t in self.terms if isinstance(t, Variable)]

    def is_ground(self) -> bool:
        return not any(isinstance(t, Variable) for t in self.terms)

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(format_term(t) for t in self.terms)})"


@dataclass(frozen=True)
class Constraint:
    op: str
    left: Term
    right: Term

    def variables(self) -> list[Variable]:
        return [t for t in (self.left, self.right) if isinstance(t, Variable)]

    def __str__(self) -> str:
        return f"{format_term(self.left)} {self.op} {format_term(self.right)}"


@dataclass(frozen=True)
class Rule:
    head: tuple[Atom, ...]
    body: tuple[Atom, ...]
    negated: tuple[Atom, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    @property
    def existential_variables(self) -> list[Variable]:
        seen = []
        for atom in self.head:
            for t in atom.variables():
                if t.existential and t not in seen:
                    seen.append(t)
        return seen

    @property
    def is_existential(self) -> bool:
        return bool(self.existential_variables)

    def __str__(self) -> str:
        literals = [str(a) for a in self.body]
        literals += ["~" + str(a) for a in self.negated]
        literals += [str(c) for c in self.constraints]
        head = ", ".join(str(a) for a in self.head)
        return f"{head} :- {', '.join(literals)} ."


@dataclass(frozen=True)
class SourceDirective:
    predicate: str
    arity: int
    format: str
    path: str

    def __str__(self) -> str:
        loader = _LOADER_NAMES[self.format]
        return f"@source {self.predicate}[{self.arity}]: {loader}({_quote(self.path)}) ."


@dataclass
class Program:
    declarations: list[TypeDeclaration] = field(default_factory=list)
    sources: list[SourceDirective] = field(default_factory=list)
    facts: list[Atom] = field(default_factory=list)
    rules: list[Rule] = field(default_factory=list)

    def declaration(self, predicate: str) -> TypeDeclaration | None:
        for decl in self.declarations:
            if decl.predicate == predicate:
                return decl
        return None

    def arities(self) -> dict[str, int]:
        """Arity of every predicate, fixed by its declaration or first use."""
        found: dict[str, int] = {}
        for pred, arity in _predicate_uses(self):
            found.setdefault(pred, arity)
        return found

    def head_predicates(self) -> list[str]:
        seen: dict[str, None] = {}
        for rule in self.rules:
            for atom in rule.head:
                seen.setdefault(atom.predicate)
        return list(seen)

    def __str__(self) -> str:
        return format_program(self)


# ---------------------------------------------------------------- printing

def _quote(text: str) -> str:
    out = (text.replace("\\", "\\\\").replace('"', '\\"')
           .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))
    return f'"{out}"'


def format_constant(value: DataValue) -> str:
    if value.sort is Sort.IRI:
        if _NAME_RE.fullmatch(value.value):
            return value.value
        return f"<{value.value}>"
    if value.sort is Sort.STRING:
        return _quote(value.value)
    if value.sort is Sort.LANG_STRING:
        return f"{_quote(value.value)}@{value.lang}"
    if value.sort is Sort.INTEGER:
        return str(value.value)
    if value.sort is Sort.DOUBLE:
        text = repr(value.value)
        if text in ("inf", "-inf"):
            return f'"{text.upper()}"^^<{XSD}double>'
        return text
    raise ValueError(f"nulls have no program syntax: {value}")


def format_term(term: Term) -> str:
    if isinstance(term, Variable):
        return str(term)
    return format_constant(term)


def format_program(program: Program) -> str:
    lines = []
    for decl in program.declarations:
        lines.append(f"@declare {decl.predicate}({', '.join(str(t) for t in decl.types)}) .")
    lines.extend(str(s) for s in program.sources)
    lines.extend(f"{fact} ." for fact in program.facts)
    lines.extend(str(rule) for rule in program.rules)
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- reading

class _Reader:
    def __init__(self, text: str, source: str | None):
        self.text = text
        self.pos = 0
        self.source = source

    # position helpers
    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        column = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, column

    def error(self, message: str, pos: int | None = None) -> ParseError:
        line, column = self.where(pos)
        return ParseError(message, line, column, self.source)

    def skip(self) -> None:
        text, n = self.text, len(self.text)
        while self.pos < n:
            ch = text[self.pos]
            if ch in " \t\r\n\f\v\ufeff":
                self.pos += 1
            elif ch == "%":
                end = text.find("\n", self.pos)
                self.pos = n if end < 0 else end + 1
            else:
                break

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self, literal: str) -> bool:
        self.skip()
        return self.text.startswith(literal, self.pos)

    def accept(self, literal: str) -> bool:
        if self.peek(literal):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str, what: str | None = None) -> None:
        if not self.accept(literal):
            raise self.error(f"expected {what or repr(literal)}, found {self.describe()}")

    def match(self, pattern: re.Pattern):
        self.skip()
        m = pattern.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def describe(self) -> str:
        self.skip()
        if self.pos >= len(self.text):
            return "end of input"
        snippet = self.text[self.pos:self.pos + 12].split("\n")[0]
        return repr(snippet)

    # grammar
    def name(self, what: str) -> str:
        m = self.match(_NAME_RE)
        if not m:
            raise self.error(f"expected {what}, found {self.describe()}")
        return m.group(0)

    def string_body(self) -> str:
        # self.pos is on the opening quote
        start = self.pos
        self.pos += 1
        out = []
        text = self.text
        while True:
            if self.pos >= len(text):
                raise self.error("unterminated string", start)
            ch = text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\n":
                raise self.error("newline inside string", start)
            if ch == "\\":
                out.append(self.escape())
                continue
            out.append(ch)
            self.pos += 1

    def escape(self) -> str:
        text = self.text
        if self.pos + 1 >= len(text):
            raise self.error("dangling escape")
        code = text[self.pos + 1]
        simple = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f",
                  '"': '"', "'": "'", "\\": "\\"}
        if code in simple:
            self.pos += 2
            return simple[code]
        width = {"u": 4, "U": 8}.get(code)
        if width:
            digits = text[self.pos + 2:self.pos + 2 + width]
            if len(digits) == width and all(c in "0123456789abcdefABCDEF" for c in digits):
                self.pos += 2 + width
                try:
                    return chr(int(digits, 16))
                except ValueError:
                    raise self.error("escape out of range") from None
        raise self.error(f"invalid escape \\{code}")

    def constant(self) -> DataValue:
        self.skip()
        start = self.pos
        text = self.text
        if text.startswith('"', self.pos):
            body = self.string_body()
            m = _LANG_RE.match(text, self.pos)
            if m:
                self.pos = m.end()
                return DataValue.lang_string(body, m.group(1))
            if text.startswith("^^", self.pos):
                self.pos += 2
                m = _IRI_RE.match(text, self.pos)
                if not m:
                    raise self.error("expected datatype IRI after ^^")
                self.pos = m.end()
                try:
                    return typed_literal(body, m.group(1))
                except ValueError as exc:
                    raise self.error(str(exc), start) from None
            return DataValue.string(body)
        m = _IRI_RE.match(text, self.pos)
        if m:
            self.pos = m.end()
            return DataValue.iri(m.group(1))
        m = _DOUBLE_RE.match(text, self.pos)
        if m and not _continues_name(text, m.end()):
            self.pos = m.end()
            return DataValue.double(float(m.group(0)))
        m = _INTEGER_RE.match(text, self.pos)
        if m and not _continues_name(text, m.end()):
            self.pos = m.end()
            try:
                return DataValue.integer(int(m.group(0)))
            except ValueError as exc:
                raise self.error(str(exc), start) from None
        m = _NAME_RE.match(text, self.pos)
        if m:
            self.pos = m.end()
            return DataValue.iri(m.group(0))
        raise self.error(f"expected a term, found {self.describe()}")

    def term(self) -> Term:
        self.skip()
        ch = self.text[self.pos:self.pos + 1]
        if ch in ("?", "!"):
            self.pos += 1
            m = _VARNAME_RE.match(self.text, self.pos)
            if not m:
                raise self.error("expected a variable name")
            self.pos = m.end()
            return Variable(m.group(0), existential=(ch == "!"))
        return self.constant()

    def atom(self, predicate: str | None = None) -> Atom:
        if predicate is None:
            predicate = self.name("a predicate name")
        self.expect("(")
        terms = [self.term()]
        while self.accept(","):
            terms.append(self.term())
        self.expect(")", "',' or ')'")
        return Atom(predicate, tuple(terms))

    def literal(self):
        """Returns ('pos'|'neg', Atom) or ('cmp', Constraint)."""
        if self.accept("~"):
            return "neg", self.atom()
        self.skip()
        save = self.pos
        m = _NAME_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            if self.peek("("):
                return "pos", self.atom(m.group(0))
            self.pos = save
        left = self.term()
        m = self.match(_OPERATOR_RE)
        if not m:
            raise self.error(f"expected an atom or comparison, found {self.describe()}", save)
        right = self.term()
        return "cmp", Constraint(m.group(0), left, right)

    def declare_directive(self) -> TypeDeclaration:
        predicate = self.name("a predicate name")
        self.expect("(")
        types = []
        while True:
            start = self.pos
            word = self.name("a datatype")
            try:
                types.append(PositionType.parse(word))
            except ValueError as exc:
                raise self.error(str(exc), start) from None
            if not self.accept(","):
                break
        self.expect(")", "',' or ')'")
        self.expect(".", "'.' ending the statement")
        return TypeDeclaration(predicate, tuple(types))

    def source_directive(self) -> SourceDirective:
        predicate = self.name("a predicate name")
        self.expect("[")
        m = self.match(re.compile(r"[0-9]+"))
        if not m:
            raise self.error("expected the source arity")
        arity = int(m.group(0))
        self.expect("]")
        self.expect(":")
        start = self.pos
        loader = self.name("a loader such as load-csv")
        if loader not in LOADERS:
            raise self.error(f"unknown loader {loader!r}", start)
        self.expect("(")
        if not self.peek('"'):
            raise self.error("expected a quoted file name")
        path = self.string_body()
        self.expect(")")
        self.expect(".", "'.' ending the statement")
        return SourceDirective(predicate, arity, LOADERS[loader], path)

    def program(self) -> Program:
        program = Program()
        while not self.at_end():
            if self.accept("@"):
                start = self.pos
                directive = self.name("a directive")
                if directive == "declare":
                    program.declarations.append(self.declare_directive())
                elif directive == "source":
                    program.sources.append(self.source_directive())
                else:
                    raise self.error(f"unknown directive @{directive}", start)
                continue
            head = [self.atom()]
            while self.accept(","):
                head.append(self.atom())
            if self.accept(":-"):
                body, negated, constraints = [], [], []
                while True:
                    kind, item = self.literal()
                    {"pos": body, "neg": negated, "cmp": constraints}[kind].append(item)
                    if not self.accept(","):
                        break
                self.expect(".", "',' or '.' ending the rule")
                program.rules.append(Rule(tuple(head), tuple(body), tuple(negated), tuple(constraints)))
            else:
                self.expect(".", "':-' or '.'")
                program.facts.extend(head)
        return program


def _continues_name(text: str, pos: int) -> bool:
    return pos < len(text) and (text[pos].isalnum() or text[pos] == "_")


def typed_literal(lexical: str, datatype: str) -> DataValue:
    """Value of an RDF-style ``"lexical"^^<datatype>`` literal."""
    if datatype in INTEGER_DATATYPES:
        if not _INTEGER_RE.fullmatch(lexical.lstrip("+")):
            raise ValueError(f"invalid integer literal {lexical!r}")
        return DataValue.integer(int(lexical))
    if datatype in DOUBLE_DATATYPES:
        try:
            number = float(lexical)
        except ValueError:
            raise ValueError(f"invalid numeric literal {lexical!r}") from None
        if number != number:
            raise ValueError("NaN literals are rejected")
        return DataValue.double(number)
    return DataValue.string(lexical)


def parse_program(text: str, *, source: str | None = None, validate: bool = True) -> Program:
    """Parse program text; raises ParseError, or ValidationError when unsafe."""
    program = _Reader(text, source).program()
    if validate:
        report = check_safety(program)
        if not report.ok:
            raise ValidationError(report)
    return program


def parse_term(text: str) -> Term:
    reader = _Reader(text, None)
    term = reader.term()
    if not reader.at_end():
        raise reader.error(f"unexpected {reader.describe()} after term")
    return term


def parse_constant(text: str) -> DataValue:
    term = parse_term(text)
    if isinstance(term, Variable):
        raise ParseError("expected a constant, found a variable", 1, 1)
    return term


# -------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    statement: str = ""

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}" + (f" in `{self.statement}`" if self.statement else "")


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


def _predicate_uses(program: Program) -> Iterable[tuple[str, int]]:
    for decl in program.declarations:
        yield decl.predicate, decl.arity
    for src in program.sources:
        yield src.predicate, src.arity
    for fact in program.facts:
        yield fact.predicate, fact.arity
    for rule in program.rules:
        for atom in rule.head + rule.body + rule.negated:
            yield atom.predicate, atom.arity


def check_safety(program: Program) -> ValidationReport:
    report = ValidationReport()
    add = report.violations.append

    declared: dict[str, TypeDeclaration] = {}
    for decl in program.declarations:
        if decl.predicate in declared:
            add(Violation("duplicate-declaration", f"{decl.predicate} is declared more than once"))
        declared.setdefault(decl.predicate, decl)

    arity = program.arities()
    for pred, n in _predicate_uses(program):
        if arity[pred] != n:
            add(Violation("arity-mismatch", f"{pred} is used with arity {n} and {arity[pred]}"))

    for src in program.sources:
        if src.format == "ntriples" and src.arity != 3:
            add(Violation("arity-mismatch", f"RDF source for {src.predicate} must have arity 3",
                          str(src)))

    for fact in program.facts:
        for t in fact.variables():
            add(Violation("non-ground-fact", f"fact contains variable {t}", f"{fact} ."))

    for rule in program.rules:
        text = str(rule)
        positive = {t for atom in rule.body for t in atom.variables()}
        for atom in rule.body + rule.negated:
            for t in atom.variables():
                if t.existential:
                    add(Violation("existential-in-body", f"existential variable {t} occurs in the body", text))
        for c in rule.constraints:
            for t in c.variables():
                if t.existential:
                    add(Violation("existential-in-body", f"existential variable {t} occurs in a constraint", text))
        reported = set()

        def unbound(var: Variable, where: str):
            if var.existential or var in positive or (var, where) in reported:
                return
            reported.add((var, where))
            add(Violation("unbound-variable", f"{where} variable {var} does not occur in a positive body atom", text))

        for atom in rule.head:
            for t in atom.variables():
                unbound(t, "head")
        for atom in rule.negated:
            for t in atom.variables():
                unbound(t, "negated")
        for c in rule.constraints:
            for t in c.variables():
                unbound(t, "constraint")
    return report
