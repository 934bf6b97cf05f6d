"""Rule-body evaluation with leapfrog triejoin.

A :class:`JoinPlan` fixes a global variable order.  Every positive body atom
is read through a trie whose levels are its constant positions (matched by
seeks before the search starts) followed by its variables in plan order.
The search then binds one variable per depth by intersecting the sorted
levels of all atoms that mention it.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .parser import Atom, Constraint, Rule, Variable, format_term
from .storage import ID_DTYPE, Relation, Trie, _build_sorted, member_mask, trie_from_tuples
from .values import DataValue, Dictionary

log = logging.getLogger(__name__)

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class AtomBinding:
    """How one positive atom is read during the join.

    ``columns`` lists the atom positions in trie level order: constants
    first, then one position per distinct variable in plan order.
    ``equalities`` pairs positions that repeat a variable; such atoms are
    read through a filtered copy of the relation.
    """

    atom: Atom
    constants: tuple[tuple[int, DataValue], ...]
    variables: tuple[int, ...]
    columns: tuple[int, ...]
    equalities: tuple[tuple[int, int], ...] = ()

    @property
    def trie_order(self) -> tuple[int, ...]:
        return self.columns


@dataclass(frozen=True)
class NegatedBinding:
    atom: Atom
    # per atom position: ("var", plan index) or ("const", value)
    slots: tuple[tuple[str, object], ...]


@dataclass(frozen=True)
class JoinPlan:
    variables: tuple[Variable, ...]
    atoms: tuple[AtomBinding, ...]
    constraints: tuple[tuple[Constraint, ...], ...]  # indexed by depth
    ground_constraints: tuple[Constraint, ...]
    negated: tuple[NegatedBinding, ...]
    label: str = ""

    def index(self, var: Variable) -> int:
        return self.variables.index(var)


def _canonical_atom_key(atom: Atom):
    return (atom.predicate, atom.arity, tuple(format_term(t) for t in atom.terms))


def variable_order(rule: Rule) -> tuple[Variable, ...]:
    """Variables by descending number of positive atoms containing them.

    Ties go to the variable that occurs first when the body atoms are listed
    in canonical (predicate, terms) order, so the result does not depend on
    how the body happens to be written.
    """
    counts: dict[Variable, int] = {}
    first: dict[Variable, int] = {}
    position = 0
    for atom in sorted(rule.body, key=_canonical_atom_key):
        for var in dict.fromkeys(atom.variables()):
            counts[var] = counts.get(var, 0) + 1
        for t in atom.terms:
            if isinstance(t, Variable):
                first.setdefault(t, position)
            position += 1
    return tuple(sorted(counts, key=lambda v: (-counts[v], first[v])))


def _bind_atom(atom: Atom, rank: Mapping[Variable, int]) -> AtomBinding:
    constants = tuple((i, t) for i, t in enumerate(atom.terms) if not isinstance(t, Variable))
    first_pos: dict[Variable, int] = {}
    equalities = []
    for i, t in enumerate(atom.terms):
        if isinstance(t, Variable):
            if t in first_pos:
                equalities.append((first_pos[t], i))
            else:
                first_pos[t] = i
    ordered_vars = sorted(first_pos, key=rank.__getitem__)
    columns = tuple(i for i, _ in constants) + tuple(first_pos[v] for v in ordered_vars)
    return AtomBinding(atom, constants, tuple(rank[v] for v in ordered_vars), columns, tuple(equalities))


def plan(rule: Rule) -> JoinPlan:
    """Deterministic join plan for a (safe) rule body."""
    variables = variable_order(rule)
    rank = {v: i for i, v in enumerate(variables)}
    atoms = tuple(_bind_atom(a, rank) for a in rule.body)
    per_depth: list[list[Constraint]] = [[] for _ in variables]
    ground = []
    for c in rule.constraints:
        depths = [rank[v] for v in c.variables()]
        if depths:
            per_depth[max(depths)].append(c)
        else:
            ground.append(c)
    negated = tuple(
        NegatedBinding(a, tuple(("var", rank[t]) if isinstance(t, Variable) else ("const", t) for t in a.terms))
        for a in rule.negated
    )
    return JoinPlan(variables, atoms, tuple(tuple(cs) for cs in per_depth), tuple(ground), negated,
                    label=str(rule))


def atom_trie(relation: Relation, binding: AtomBinding) -> Trie:
    """The trie of ``relation`` laid out the way ``binding`` reads it."""
    if not binding.equalities:
        return relation.trie(binding.columns)
    key = ("filtered", binding.columns, binding.equalities)
    cached = relation._tries.get(key)
    if cached is None:
        rows = relation.rows
        mask = np.ones(len(rows), dtype=bool)
        for a, b in binding.equalities:
            mask &= rows[:, a] == rows[:, b]
        cached = trie_from_tuples(rows[mask][:, list(binding.columns)], arity=len(binding.columns))
        relation._tries[key] = cached
    return cached


# ------------------------------------------------------------- constraints

def compare_values(op: str, a: DataValue, b: DataValue) -> bool | None:
    """Outcome of ``a op b``; None when the comparison is a type error."""
    if a.is_numeric and b.is_numeric:
        x, y = a.value, b.value
    elif op == "=":
        return a == b
    elif op == "!=":
        return a != b
    else:
        return None
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    if op == ">=":
        return x >= y
    raise ValueError(f"unknown comparison {op!r}")


def evaluate_constraint(c: Constraint, bound: Mapping, *, warned: set | None = None, label: str = "") -> bool:
    """Evaluate a comparison under variable bindings.

    ``bound`` maps variables (or their names) to values.  Ordering
    comparisons that involve a non-numeric value are false; a warning is
    logged once per ``label`` when ``warned`` is supplied.
    """

    def value(t):
        if isinstance(t, Variable):
            return bound[t] if t in bound else bound[t.name]
        return t

    outcome = compare_values(c.op, value(c.left), value(c.right))
    if outcome is None:
        _warn(c, value(c.left), value(c.right), warned, label)
        return False
    return outcome


def _warn(c: Constraint, a: DataValue, b: DataValue, warned: set | None, label: str) -> None:
    key = label or str(c)
    if warned is not None:
        if key in warned:
            return
        warned.add(key)
    log.warning("comparison %s on non-numeric values %s and %s is false (rule %s)", c.op, a, b, key)


def _compile_check(c: Constraint, rank: Mapping[Variable, int], values: list, warned, label) -> Callable:
    op = c.op
    lv = ("var", rank[c.left]) if isinstance(c.left, Variable) else ("const", c.left)
    rv = ("var", rank[c.right]) if isinstance(c.right, Variable) else ("const", c.right)

    def check(binding: list) -> bool:
        a = values[binding[lv[1]]] if lv[0] == "var" else lv[1]
        b = values[binding[rv[1]]] if rv[0] == "var" else rv[1]
        outcome = compare_values(op, a, b)
        if outcome is None:
            _warn(c, a, b, warned, label)
            return False
        return outcome

    return check


# ---------------------------------------------------------------- iterator

class TrieIterator:
    """Leapfrog iterator over one trie: ``open``/``up`` move between levels,
    ``next``/``seek`` move forward within the current level's interval."""

    __slots__ = ("_layers", "depth", "lo", "hi", "pos", "_stack")

    def __init__(self, trie: Trie):
        self._layers = trie.lists()
        self.depth = -1
        self.lo = self.hi = self.pos = 0
        self._stack: list[tuple[int, int, int]] = []

    def open(self) -> None:
        if self.depth >= 0:
            self._stack.append((self.lo, self.hi, self.pos))
            starts = self._layers[self.depth][1]
            self.lo, self.hi = starts[self.pos], starts[self.pos + 1]
        else:
            self.lo, self.hi = 0, len(self._layers[0][0])
        self.depth += 1
        self.pos = self.lo

    def up(self) -> None:
        self.depth -= 1
        if self.depth >= 0:
            self.lo, self.hi, self.pos = self._stack.pop()

    def at_end(self) -> bool:
        return self.pos >= self.hi

    def key(self) -> int:
        return self._layers[self.depth][0][self.pos]

    def next(self) -> None:
        self.pos += 1

    def seek(self, key: int) -> None:
        """Move to the least key >= ``key``; never moves backwards."""
        data = self._layers[self.depth][0]
        if self.pos < self.hi and data[self.pos] < key:
            self.pos = bisect_left(data, key, self.pos + 1, self.hi)

    def level_data(self) -> list:
        return self._layers[self.depth][0]


# -------------------------------------------------------------------- join

def leapfrog_join(join_plan: JoinPlan, tries: Sequence[Trie], dictionary: Dictionary, *,
                  negated: Sequence = (), warned: set | None = None) -> Trie:
    """All bindings of ``join_plan.variables`` satisfying the rule body.

    ``tries[i]`` must be laid out as ``join_plan.atoms[i]`` requires (see
    :func:`atom_trie`).  ``negated[j]`` holds the facts (a Relation or a
    Trie) of the ``j``-th negated atom.  The result has one column per plan
    variable, in plan order.
    """
    nvars = len(join_plan.variables)
    values = dictionary.values
    empty = Trie(tuple(range(nvars)), (), 0) if nvars == 0 else trie_from_tuples([], arity=nvars)
    warned = set() if warned is None else warned

    for c in join_plan.ground_constraints:
        if not evaluate_constraint(c, {}, warned=warned, label=join_plan.label):
            return empty

    iters = []
    for binding, trie in zip(join_plan.atoms, tries):
        if trie.row_count == 0:
            return empty
        it = TrieIterator(trie)
        for _, const in binding.constants:
            cid = dictionary.lookup(const)
            if cid is None:
                return empty
            it.open()
            it.seek(cid)
            if it.at_end() or it.key() != cid:
                return empty
        iters.append(it)

    rank = {v: i for i, v in enumerate(join_plan.variables)}
    participants = [[] for _ in range(nvars)]
    for binding, it in zip(join_plan.atoms, iters):
        for depth in binding.variables:
            participants[depth].append(it)
    checks = [[_compile_check(c, rank, values, warned, join_plan.label) for c in cs]
              for cs in join_plan.constraints]

    out: list[tuple] = []
    binding = [0] * nvars

    def search(depth: int) -> None:
        its = participants[depth]
        depth_checks = checks[depth]
        last = depth + 1 == nvars
        for it in its:
            it.open()
        if len(its) == 1:
            it = its[0]
            data = it.level_data()
            if last and not depth_checks:
                prefix = tuple(binding[:depth])
                out.extend([prefix + (key,) for key in data[it.lo:it.hi]])
            else:
                for p in range(it.lo, it.hi):
                    it.pos = p
                    binding[depth] = data[p]
                    if depth_checks and not all(chk(binding) for chk in depth_checks):
                        continue
                    if last:
                        out.append(tuple(binding))
                    else:
                        search(depth + 1)
        else:
            _leapfrog(its, depth, depth_checks, last)
        for it in its:
            it.up()

    def _leapfrog(its, depth, depth_checks, last):
        if any(it.at_end() for it in its):
            return
        its = sorted(its, key=TrieIterator.key)
        k = len(its)
        p = 0
        high = its[k - 1].key()
        while True:
            it = its[p]
            key = it.key()
            if key == high:
                binding[depth] = key
                if not depth_checks or all(chk(binding) for chk in depth_checks):
                    if last:
                        out.append(tuple(binding))
                    else:
                        search(depth + 1)
                it.next()
            else:
                it.seek(high)
            if it.at_end():
                return
            high = it.key()
            p = (p + 1) % k

    if nvars == 0:
        out.append(())
    else:
        search(0)

    rows = np.array(out, dtype=ID_DTYPE).reshape(len(out), nvars)
    if join_plan.negated and len(rows):
        keep = np.ones(len(rows), dtype=bool)
        for neg, facts in zip(join_plan.negated, negated):
            query = _negated_query(neg, rows, dictionary)
            if query is None:
                continue
            hay = facts.rows if isinstance(facts, Relation) else facts.to_relation_array()
            keep &= ~member_mask(hay, query)
        rows = rows[keep]
    return _build_sorted(rows, tuple(range(nvars)))


def _negated_query(neg: NegatedBinding, rows: np.ndarray, dictionary: Dictionary) -> np.ndarray | None:
    cols = []
    for kind, item in neg.slots:
        if kind == "var":
            cols.append(rows[:, item])
        else:
            cid = dictionary.lookup(item)
            if cid is None:
                return None  # constant never seen, so the atom cannot hold
            cols.append(np.full(len(rows), cid, dtype=ID_DTYPE))
    return np.stack(cols, axis=1)


def decode_bindings(trie: Trie, dictionary: Dictionary) -> set[tuple[DataValue, ...]]:
    """Bindings of a join result as value tuples."""
    values = dictionary.values
    return {tuple(values[i] for i in row) for row in trie.enumerate()}
