"""Inventing offices with the restricted chase.

Every employee works in some office that belongs to their department.  When
the data already names such an office, nothing happens.  Otherwise the engine
creates a fresh labelled null and uses it in both head atoms.

Run with ``python demos/restricted_chase.py``.
"""

from importlib import resources

from trieflow import Limits, ResourceLimitError, load_program, materialise, parse_program

# %% The offices scenario: three CSV files and three rules.
scenario = resources.files("trieflow") / "scenarios" / "offices"
program, base_dir = load_program(scenario / "offices.rls")
state, report = materialise(program, base_dir=base_dir)
print(f"{report.chase_applications} chase applications, {report.nulls} nulls")

# %% Known offices keep their names; invented ones print as _:n<k>.
for name, office in state.sorted_facts("worksIn"):
    print(f"{name.value:10} {office}")

# %% Nulls are shared across the head, so each invented office has a department.
for office, dept in state.sorted_facts("office"):
    print(f"{str(office):24} {dept.value}")

# %% Running the chase again on its own result adds nothing.
count = state.fact_count()
state, again = materialise(program, state=state)
print("fixpoint stable:", state.fact_count() == count and again.chase_applications == 0)

# %% Not every chase terminates.  Here each new fact demands another one, so
# the fact limit stops the run and the partial state stays available.
endless = parse_program("s(a, b) . s(?y, !z) :- s(?x, ?y) .")
try:
    materialise(endless, Limits(max_facts=8))
except ResourceLimitError as err:
    print(err)
    print("facts kept:", err.state.fact_count())
