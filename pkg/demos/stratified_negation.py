"""Which nodes cannot reach each other?

Reachability is recursive.  "Not reachable" is only meaningful once
reachability is complete, so the rule using negation goes into a later
stratum.  A program whose negation runs through a cycle has no such order
and is rejected.

Run with ``python demos/stratified_negation.py``.
"""

from importlib import resources

from trieflow import NegationCycleError, load_program, materialise, parse_program, stratify

# %% Two strata: node and reach first, unreachable after.
scenario = resources.files("trieflow") / "scenarios" / "reachability"
program, base_dir = load_program(scenario / "reach.rls")
strat = stratify(program)
for k, rules in enumerate(strat.strata):
    print(f"stratum {k}: {sorted({a.predicate for r in rules for a in r.head})}")

# %% Materialise stratum by stratum.
state, report = materialise(program, base_dir=base_dir)
print("reach:", len(state.relation("reach")), "unreachable:", len(state.relation("unreachable")))
for x, y in state.sorted_facts("unreachable")[:5]:
    print(f"{x.value} cannot reach {y.value}")

# %% Mutual negation has no stratification.
cyclic = parse_program("b(a) . p(?x) :- b(?x), ~q(?x) . q(?x) :- b(?x), ~p(?x) .")
try:
    stratify(cyclic)
except NegationCycleError as err:
    print("rejected:", err)
