"""Materialisation: stratification, semi-naive fixpoints and the restricted chase."""

from __future__ import annotations

import logging
import time
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NegationCycleError, ResourceLimitError
from .io import iter_source, program_sources
from .join import JoinPlan, atom_trie, leapfrog_join, plan
from .parser import Atom, Program, Rule, Variable
from .storage import ID_DTYPE, Relation, Trie
from .values import DataValue, Dictionary

log = logging.getLogger(__name__)


@dataclass
class Limits:
    max_facts: int = 10**9
    max_iterations: int = 10**6
    timeout: float | None = None  # seconds of wall clock for the whole run


@dataclass
class Stratification:
    strata: list[list[Rule]]
    predicate_stratum: dict[str, int]

    def __len__(self) -> int:
        return len(self.strata)


def _rule_edges(rules: Sequence[Rule]):
    """Dependency edges (body predicate, head predicate, negative?)."""
    for rule in rules:
        heads = [a.predicate for a in rule.head]
        for h in heads:
            for atom in rule.body:
                yield atom.predicate, h, False
            for atom in rule.negated:
                yield atom.predicate, h, True
            for other in heads:
                if other != h:
                    yield other, h, False


def _negation_cycle(edges) -> list[str]:
    """Shortest dependency cycle through a negative edge, as head-depends-on-body
    steps starting from the alphabetically smallest predicate."""
    succ: dict[str, set[str]] = {}
    for q, h, _ in edges:
        succ.setdefault(q, set()).add(h)
    best = None
    for q, h, negative in sorted(set(edges)):
        if not negative:
            continue
        # the negative edge q -> h closes a cycle when h reaches q
        parent = {h: None}
        queue = deque([h])
        while queue and q not in parent:
            node = queue.popleft()
            for nxt in sorted(succ.get(node, ())):
                if nxt not in parent:
                    parent[nxt] = node
                    queue.append(nxt)
        if q not in parent:
            continue
        walk = [q]
        while walk[-1] != h:
            walk.append(parent[walk[-1]])
        # walk runs q <- ... <- h against the edges, i.e. along "depends on"
        if h == q:
            cycle = [q]
        else:
            cycle = [h] + walk[:-1]
        start = cycle.index(min(cycle))
        cycle = cycle[start:] + cycle[:start]
        if best is None or (len(cycle), cycle) < (len(best), best):
            best = cycle
    return best or []


def stratify(program: Program | Sequence[Rule]) -> Stratification:
    """Least stratification; raises NegationCycleError when none exists."""
    rules = list(program.rules if isinstance(program, Program) else program)
    edges = list(_rule_edges(rules))
    preds = {p for q, h, _ in edges for p in (q, h)}
    for rule in rules:
        preds.update(a.predicate for a in rule.head)
    level = dict.fromkeys(preds, 0)
    bound = len(preds)
    changed = True
    while changed:
        changed = False
        for q, h, negative in edges:
            need = level[q] + (1 if negative else 0)
            if level[h] < need:
                level[h] = need
                changed = True
                if need > bound:
                    raise NegationCycleError(_negation_cycle(edges))
    rule_levels = sorted({level[r.head[0].predicate] for r in rules})
    index = {lv: i for i, lv in enumerate(rule_levels)}
    strata: list[list[Rule]] = [[] for _ in rule_levels]
    for rule in rules:
        strata[index[level[rule.head[0].predicate]]].append(rule)
    heads = {a.predicate for r in rules for a in r.head}
    predicate_stratum = {p: (index[level[p]] if p in heads else -1) for p in sorted(preds)}
    return Stratification(strata, predicate_stratum)


@dataclass
class ExecutionReport:
    load_seconds: float = 0.0
    stratum_seconds: list[float] = field(default_factory=list)
    derived: dict[str, int] = field(default_factory=dict)
    chase_applications: int = 0
    nulls: int = 0
    iterations: int = 0

    @property
    def reason_seconds(self) -> float:
        return sum(self.stratum_seconds)

    @property
    def inferred_facts(self) -> int:
        return sum(self.derived.values())


class ChaseState:
    """Facts of a materialisation run.

    ``full[p]`` holds every known fact of ``p``; ``delta[p]`` the facts that
    were new in the last iteration (always a subset of ``full[p]``).
    """

    def __init__(self, dictionary: Dictionary, arities: dict[str, int]):
        self.dictionary = dictionary
        self.arity = dict(arities)
        self.full: dict[str, Relation] = {p: Relation(n) for p, n in arities.items()}
        self.delta: dict[str, Relation] = {}
        self.next_null = 0
        self.iteration = 0
        self.strata_done: list[bool] = []
        self.input_counts: dict[str, int] = {}
        self.chase_applications = 0

    def relation(self, predicate: str) -> Relation:
        found = self.full.get(predicate)
        if found is None:
            found = self.full[predicate] = Relation(self.arity[predicate])
        return found

    def fact_count(self) -> int:
        return sum(len(r) for r in self.full.values())

    def mint_null(self) -> int:
        label = self.next_null
        self.next_null += 1
        return self.dictionary.intern(DataValue.null(label))

    def facts(self, predicate: str) -> set[tuple[DataValue, ...]]:
        values = self.dictionary.values
        rel = self.full.get(predicate)
        if rel is None:
            return set()
        return {tuple(values[i] for i in row) for row in rel}

    def sorted_facts(self, predicate: str) -> list[tuple[DataValue, ...]]:
        """Facts in storage (value) order."""
        values = self.dictionary.values
        rel = self.full.get(predicate)
        return [] if rel is None else [tuple(values[i] for i in row) for row in rel]

    def ensure_constants(self, constants: Iterable[DataValue]) -> None:
        """Intern constants, re-sorting the id space if that breaks value order."""
        missing = [c for c in dict.fromkeys(constants) if c not in self.dictionary]
        if not missing:
            return
        for c in missing:
            self.dictionary.intern(c)
        fresh, remap = self.dictionary.sorted_copy()
        self.dictionary = fresh
        self.full = {p: Relation(r.arity, remap[r.rows] if len(r) else r.rows) for p, r in self.full.items()}
        self.delta = {p: Relation(r.arity, remap[r.rows] if len(r) else r.rows) for p, r in self.delta.items()}


def program_constants(program: Program) -> list[DataValue]:
    found: list[DataValue] = []
    atoms: list[Atom] = list(program.facts)
    for rule in program.rules:
        atoms += rule.head + rule.body + rule.negated
        for c in rule.constraints:
            found += [t for t in (c.left, c.right) if isinstance(t, DataValue)]
    for atom in atoms:
        found += [t for t in atom.terms if isinstance(t, DataValue)]
    return found


def prepare(program: Program, base_dir=None) -> ChaseState:
    """Load all sources and explicit facts into a fresh state."""
    staging = Dictionary()
    for c in program_constants(program):
        staging.intern(c)
    arities = program.arities()
    rows: dict[str, list] = {p: [] for p in arities}
    intern = staging.intern
    for spec in program_sources(program, base_dir):
        decl = program.declaration(spec.predicate)
        bucket = rows[spec.predicate]
        for row in iter_source(spec, decl):
            bucket.append([intern(v) for v in row])
    for fact in program.facts:
        rows[fact.predicate].append([intern(v) for v in fact.terms])
    dictionary, remap = staging.sorted_copy()
    state = ChaseState(dictionary, arities)
    for p, bucket in rows.items():
        if bucket:
            arr = np.asarray(bucket, dtype=ID_DTYPE).reshape(len(bucket), arities[p])
            state.full[p] = Relation(arities[p], remap[arr])
    state.input_counts = {p: len(r) for p, r in state.full.items()}
    return state


class PendingFacts:
    """Facts derived during one iteration, with lookups for chase checks."""

    def __init__(self, arities: dict[str, int]):
        self._arity = arities
        self._arrays: dict[str, list[np.ndarray]] = {}
        self._rows: dict[str, list[tuple]] = {}
        self._index: dict[tuple, dict[tuple, list[tuple]]] = {}

    def add_array(self, predicate: str, rows: np.ndarray) -> None:
        if len(rows) == 0:
            return
        self._arrays.setdefault(predicate, []).append(rows)
        for (pred, positions), index in self._index.items():
            if pred == predicate:
                for row in map(tuple, rows.tolist()):
                    index.setdefault(tuple(row[i] for i in positions), []).append(row)

    def add_row(self, predicate: str, row: tuple) -> None:
        self._rows.setdefault(predicate, []).append(row)
        for (pred, positions), index in self._index.items():
            if pred == predicate:
                index.setdefault(tuple(row[i] for i in positions), []).append(row)

    def lookup(self, predicate: str, positions: tuple[int, ...], key: tuple) -> list[tuple]:
        index = self._index.get((predicate, positions))
        if index is None:
            index = {}
            for row in self._all_rows(predicate):
                index.setdefault(tuple(row[i] for i in positions), []).append(row)
            self._index[(predicate, positions)] = index
        return index.get(key, [])

    def _all_rows(self, predicate: str):
        for arr in self._arrays.get(predicate, ()):
            yield from map(tuple, arr.tolist())
        yield from self._rows.get(predicate, ())

    def predicates(self) -> set[str]:
        return set(self._arrays) | set(self._rows)

    def relation(self, predicate: str) -> Relation:
        arity = self._arity[predicate]
        parts = list(self._arrays.get(predicate, ()))
        extra = self._rows.get(predicate)
        if extra:
            parts.append(np.asarray(extra, dtype=ID_DTYPE).reshape(len(extra), arity))
        if not parts:
            return Relation(arity)
        return Relation(arity, np.concatenate(parts))


def _head_rows(atom: Atom, join_plan: JoinPlan, bindings: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    rank = {v: i for i, v in enumerate(join_plan.variables)}
    cols = []
    for t in atom.terms:
        if isinstance(t, Variable):
            cols.append(bindings[:, rank[t]])
        else:
            cols.append(np.full(len(bindings), dictionary.lookup(t), dtype=ID_DTYPE))
    return np.stack(cols, axis=1)


class _HeadMatcher:
    """Searches for a homomorphism of an existential rule head into known facts.

    Universal variables are fixed by the trigger; existential variables are
    free.  Candidates come from the full relations (via tries ordered with
    the bound positions first) and from facts pending in this iteration.
    """

    def __init__(self, rule: Rule, join_plan: JoinPlan, dictionary: Dictionary):
        rank = {v: i for i, v in enumerate(join_plan.variables)}
        self.steps = []
        bound_ex: set[Variable] = set()
        head = list(rule.head)
        for k, atom in enumerate(head):
            bound_pos, bound_src, free_pos, free_vars = [], [], [], []
            for i, t in enumerate(atom.terms):
                if not isinstance(t, Variable):
                    bound_pos.append(i)
                    bound_src.append(("const", dictionary.lookup(t)))
                elif not t.existential:
                    bound_pos.append(i)
                    bound_src.append(("univ", rank[t]))
                elif t in bound_ex:
                    bound_pos.append(i)
                    bound_src.append(("ex", t))
                else:
                    free_pos.append(i)
                    free_vars.append(t)
            later = {t for a in head[k + 1:] for t in a.variables() if t.existential}
            simple = len(set(free_vars)) == len(free_vars) and not (set(free_vars) & later)
            bound_ex.update(free_vars)
            self.steps.append((atom.predicate, tuple(bound_pos), tuple(bound_src),
                               tuple(free_pos), tuple(free_vars), simple))

    def satisfied(self, state: ChaseState, pending: PendingFacts, trigger: Sequence[int]) -> bool:
        return self._search(0, state, pending, trigger, {})

    def _search(self, k, state, pending, trigger, assignment) -> bool:
        if k == len(self.steps):
            return True
        pred, bound_pos, bound_src, free_pos, free_vars, simple = self.steps[k]
        key = []
        for kind, item in bound_src:
            if kind == "const":
                key.append(item)
            elif kind == "univ":
                key.append(trigger[item])
            else:
                key.append(assignment[item])
        key = tuple(key)
        for candidate in self._candidates(state, pending, pred, bound_pos, free_pos, key, simple):
            if candidate is True:
                if self._search(k + 1, state, pending, trigger, assignment):
                    return True
                continue
            extended = dict(assignment)
            ok = True
            for var, val in zip(free_vars, candidate):
                if extended.setdefault(var, val) != val:
                    ok = False
                    break
            if ok and self._search(k + 1, state, pending, trigger, extended):
                return True
        return False

    def _candidates(self, state, pending, pred, bound_pos, free_pos, key, simple):
        """Yields free-position tuples, or True once when any match will do."""
        rel = state.full.get(pred)
        if rel is not None and len(rel):
            trie = rel.trie(bound_pos + free_pos)
            rng = _prefix_range(trie, key)
            if rng is not None:
                if simple:
                    yield True
                    return
                yield from _suffixes(trie, len(key), *rng)
        rows = pending.lookup(pred, bound_pos, key)
        if rows:
            if simple:
                yield True
                return
            for row in rows:
                yield tuple(row[i] for i in free_pos)


def _prefix_range(trie: Trie, key: tuple) -> tuple[int, int] | None:
    layers = trie.lists()
    if not layers:
        return (0, 1) if trie.row_count else None
    lo, hi = 0, len(layers[0][0])
    for level, value in enumerate(key):
        data, starts = layers[level]
        pos = bisect_left(data, value, lo, hi)
        if pos >= hi or data[pos] != value:
            return None
        if starts is None:
            return pos, pos + 1
        lo, hi = starts[pos], starts[pos + 1]
    return lo, hi


def _suffixes(trie: Trie, level: int, lo: int, hi: int):
    layers = trie.lists()
    if level >= len(layers):
        yield ()
        return
    data, starts = layers[level]
    for p in range(lo, hi):
        if starts is None:
            yield (data[p],)
        else:
            for rest in _suffixes(trie, level + 1, starts[p], starts[p + 1]):
                yield (data[p],) + rest


def chase_step(rule: Rule, bindings: Trie, state: ChaseState, pending: PendingFacts | None = None, *,
               join_plan: JoinPlan | None = None, deadline: float | None = None) -> dict[str, list[tuple]]:
    """Apply an existential rule to each binding whose head is not yet satisfied.

    Returns the head facts added, per predicate.  Fresh nulls are shared
    across the head conjunction of one trigger.
    """
    join_plan = join_plan or plan(rule)
    pending = PendingFacts(state.arity) if pending is None else pending
    matcher = _HeadMatcher(rule, join_plan, state.dictionary)
    rank = {v: i for i, v in enumerate(join_plan.variables)}
    frontier = [v for v in join_plan.variables
                if any(v in a.terms for a in rule.head)]
    rows = bindings.to_array()
    if frontier:
        cols = [rank[v] for v in frontier]
        triggers = Relation(len(cols), rows[:, cols]).rows if len(rows) else rows[:, cols]
        # matcher reads triggers by plan index; widen back to plan width
        widened = np.zeros((len(triggers), len(join_plan.variables)), dtype=ID_DTYPE)
        widened[:, cols] = triggers
        triggers = widened
    else:
        triggers = rows[:1]
    existentials = rule.existential_variables
    added: dict[str, list[tuple]] = {}
    lookup = state.dictionary.lookup
    for n, trigger in enumerate(triggers.tolist()):
        if deadline is not None and n % 4096 == 4095 and time.perf_counter() > deadline:
            raise ResourceLimitError("wall-clock limit exceeded during the chase", state)
        if matcher.satisfied(state, pending, trigger):
            continue
        nulls = {v: state.mint_null() for v in existentials}
        for atom in rule.head:
            row = tuple(
                (nulls[t] if t.existential else trigger[rank[t]]) if isinstance(t, Variable) else lookup(t)
                for t in atom.terms
            )
            pending.add_row(atom.predicate, row)
            added.setdefault(atom.predicate, []).append(row)
        state.chase_applications += 1
    return added


def _rule_bindings(rule: Rule, join_plan: JoinPlan, state: ChaseState, old, first: bool,
                   warned: set) -> Trie | None:
    """Bindings that use at least one fact from the current delta."""
    body = rule.body
    negated = [state.relation(a.predicate) for a in rule.negated]
    if not body:
        if not first:
            return None
        return leapfrog_join(join_plan, [], state.dictionary, negated=negated, warned=warned)
    results = []
    for i, atom in enumerate(body):
        delta = state.delta.get(atom.predicate)
        if delta is None or len(delta) == 0:
            continue
        sources = []
        for j, other in enumerate(body):
            if j < i:
                rel = old(other.predicate)
            elif j == i:
                rel = delta
            else:
                rel = state.relation(other.predicate)
            if len(rel) == 0:
                break
            sources.append(rel)
        else:
            tries = [atom_trie(rel, b) for rel, b in zip(sources, join_plan.atoms)]
            found = leapfrog_join(join_plan, tries, state.dictionary, negated=negated, warned=warned)
            if found.row_count:
                results.append(found)
    if not results:
        return None
    if len(results) == 1:
        return results[0]
    merged = Relation(len(join_plan.variables), np.concatenate([r.to_array() for r in results]))
    return merged.trie()


def seminaive_fixpoint(rules: Sequence[Rule], state: ChaseState, limits: Limits | None = None, *,
                       deadline: float | None = None, warned: set | None = None,
                       plans: Sequence[JoinPlan] | None = None) -> ChaseState:
    """Run the rules of one stratum to fixpoint, updating ``state`` in place."""
    limits = limits or Limits()
    warned = set() if warned is None else warned
    plans = list(plans) if plans is not None else [plan(r) for r in rules]
    for rule in rules:
        for atom in rule.head:
            state.relation(atom.predicate)
    state.delta = dict(state.full)
    first = True
    while True:
        state.iteration += 1
        if state.iteration > limits.max_iterations:
            raise ResourceLimitError(f"iteration limit {limits.max_iterations} exceeded", state)
        if deadline is not None and time.perf_counter() > deadline:
            raise ResourceLimitError("wall-clock limit exceeded", state)
        pending = PendingFacts(state.arity)
        old_cache: dict[str, Relation] = {}

        def old(pred: str) -> Relation:
            found = old_cache.get(pred)
            if found is None:
                full = state.relation(pred)
                delta = state.delta.get(pred)
                if delta is full:
                    found = Relation(full.arity)
                elif delta is not None and len(delta):
                    found = full.difference(delta)
                else:
                    found = full
                old_cache[pred] = found
            return found

        for rule, join_plan in zip(rules, plans):
            bindings = _rule_bindings(rule, join_plan, state, old, first, warned)
            if bindings is None or bindings.row_count == 0:
                continue
            if rule.is_existential:
                chase_step(rule, bindings, state, pending, join_plan=join_plan, deadline=deadline)
            else:
                arr = bindings.to_array()
                for atom in rule.head:
                    pending.add_array(atom.predicate, _head_rows(atom, join_plan, arr, state.dictionary))
        first = False

        new: dict[str, Relation] = {}
        for pred in sorted(pending.predicates()):
            fresh = pending.relation(pred).difference(state.relation(pred))
            if len(fresh):
                new[pred] = fresh
        added = sum(len(r) for r in new.values())
        if not added:
            state.delta = {}
            return state
        total = state.fact_count() + added
        if total >= limits.max_facts:
            raise ResourceLimitError(
                f"fact limit {limits.max_facts} reached ({state.fact_count()} facts, {added} more derived)", state)
        for pred, fresh in new.items():
            state.full[pred] = state.full[pred].union(fresh)
        state.delta = new


def materialise(program: Program, limits: Limits | None = None, *, base_dir=None,
                state: ChaseState | None = None) -> tuple[ChaseState, ExecutionReport]:
    """Compute all facts entailed by ``program`` (and its sources).

    Strata run in order; rules inside a stratum run in program order in
    every iteration.  Pass ``state`` to continue from earlier results
    instead of loading the program's sources.
    """
    limits = limits or Limits()
    report = ExecutionReport()
    started = time.perf_counter()
    deadline = started + limits.timeout if limits.timeout is not None else None
    strat = stratify(program)
    if state is None:
        state = prepare(program, base_dir)
        report.load_seconds = time.perf_counter() - started
    else:
        state.ensure_constants(program_constants(program))
        for pred, arity in program.arities().items():
            state.arity.setdefault(pred, arity)
    applications_before = state.chase_applications
    state.strata_done = [False] * len(strat)
    warned: set = set()
    for index, rules in enumerate(strat.strata):
        t0 = time.perf_counter()
        log.debug("stratum %d: %d rules", index, len(rules))
        seminaive_fixpoint(rules, state, limits, deadline=deadline, warned=warned)
        state.strata_done[index] = True
        report.stratum_seconds.append(time.perf_counter() - t0)
    report.derived = {p: len(r) - state.input_counts.get(p, 0) for p, r in sorted(state.full.items())}
    report.chase_applications = state.chase_applications - applications_before
    report.nulls = state.next_null
    report.iterations = state.iteration
    return state, report


def load_program(path) -> tuple[Program, Path]:
    """Parse a program file; returns it with the directory sources resolve against."""
    from .parser import parse_program

    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_program(text, source=str(path)), path.parent
