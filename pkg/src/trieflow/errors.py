"""Exception hierarchy shared by all trieflow modules."""

from __future__ import annotations


class TrieflowError(Exception):
    """Base class for every error raised by the engine."""


class ProgramError(TrieflowError):
    """Problems with the rule program itself (syntax, safety, stratification)."""


class ParseError(ProgramError):
    def __init__(self, message: str, line: int, column: int, source: str | None = None):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")
        self.message = message


class ValidationError(ProgramError):
    def __init__(self, report):
        self.report = report
        super().__init__("invalid program:\n" + "\n".join(f"  {v}" for v in report.violations))


class NegationCycleError(ProgramError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        path = " -> ".join(cycle + cycle[:1])
        super().__init__(f"program is not stratifiable: negation cycle {path}")


class DataError(TrieflowError):
    """Runtime data problems: I/O, malformed input rows, coercion failures."""


class CoercionError(DataError):
    def __init__(self, value, declared, predicate=None, position=None, line=None):
        self.value = value
        self.declared = declared
        self.predicate = predicate
        self.position = position
        self.line = line
        parts = [f"cannot load {value!s} as {declared}"]
        if predicate is not None:
            parts.append(f"predicate {predicate}")
        if position is not None:
            parts.append(f"position {position}")
        if line is not None:
            parts.append(f"line {line}")
        super().__init__(", ".join(parts))


class UnknownIdError(TrieflowError, KeyError):
    def __init__(self, value_id):
        self.value_id = value_id
        super().__init__(f"unknown value id {value_id}")

    def __str__(self):
        return self.args[0]


class ArityError(TrieflowError, ValueError):
    pass


class OrderMismatchError(TrieflowError, ValueError):
    pass


class ResourceLimitError(TrieflowError):
    """Raised when materialisation exceeds a configured fact, iteration or time budget."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state
