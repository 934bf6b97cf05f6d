"""Old lime trees in Dresden.

A street-tree register lists location, species, age and height.  A taxonomy
export links every taxon to its parent.  Which trees are older than 200 years
and belong to the genus Tilia, including all its species and varieties?

Run with ``python demos/lime_trees.py``.
"""

import logging
from importlib import resources

from trieflow import load_program, materialise, stratify

logging.basicConfig(level=logging.WARNING)

# %% The program ships with the package, next to its two data files.
scenario = resources.files("trieflow") / "scenarios" / "lime-trees"
program, base_dir = load_program(scenario / "lime.rls")
for rule in program.rules:
    print(rule)

# %% Recursion over the taxonomy, no negation: a single stratum suffices.
print("strata:", len(stratify(program)))

# %% Materialise.  The report tells how much each rule head produced.
state, report = materialise(program, base_dir=base_dir)
print(f"loaded in {report.load_seconds * 1000:.0f} ms, reasoned in {report.reason_seconds * 1000:.0f} ms")
for pred, count in sorted(report.derived.items()):
    print(f"derived {pred}: {count}")

# %% Every taxon below Tilia, found by walking parent links.
for taxon, name in state.sorted_facts("lime"):
    print(taxon.value, name.value)

# %% The answer, in value order.
for loc, species, age in state.sorted_facts("oldLime"):
    print(f"{loc.value:6} {species.value:24} {age.value} years")
