"""trieflow: in-memory Datalog materialisation over columnar tries.

Typical use::

    from trieflow import load_program, materialise

    program, base_dir = load_program("lime.rls")
    state, report = materialise(program, base_dir=base_dir)
    state.facts("oldLime")
"""

from .errors import (
    CoercionError,
    DataError,
    NegationCycleError,
    ParseError,
    ProgramError,
    ResourceLimitError,
    TrieflowError,
    ValidationError,
)
from .join import JoinPlan, evaluate_constraint, leapfrog_join, plan
from .parser import Atom, Constraint, Program, Rule, Variable, check_safety, format_program, parse_program
from .reasoner import (
    ChaseState,
    ExecutionReport,
    Limits,
    chase_step,
    load_program,
    materialise,
    prepare,
    seminaive_fixpoint,
    stratify,
)
from .storage import Relation, Trie, difference, trie_from_tuples, union
from .values import DataValue, Dictionary, PositionType, Sort, TypeDeclaration, coerce, compare

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "ChaseState",
    "CoercionError",
    "Constraint",
    "DataError",
    "DataValue",
    "Dictionary",
    "ExecutionReport",
    "JoinPlan",
    "Limits",
    "NegationCycleError",
    "ParseError",
    "PositionType",
    "Program",
    "ProgramError",
    "Relation",
    "ResourceLimitError",
    "Rule",
    "Sort",
    "Trie",
    "TrieflowError",
    "TypeDeclaration",
    "ValidationError",
    "Variable",
    "chase_step",
    "check_safety",
    "coerce",
    "compare",
    "difference",
    "evaluate_constraint",
    "format_program",
    "leapfrog_join",
    "load_program",
    "materialise",
    "parse_program",
    "plan",
    "prepare",
    "seminaive_fixpoint",
    "stratify",
    "trie_from_tuples",
    "union",
]
