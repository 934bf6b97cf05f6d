import re
import subprocess
import sys

import pytest

from support import SCENARIOS
from trieflow.cli import main

LIME = SCENARIOS / "lime-trees" / "lime.rls"


def write(tmp_path, text, name="p.rls"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_lime_run_exports_and_times(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code = main(["run", str(LIME), "--export-dir", str(out_dir), "--timing"])
    out = capsys.readouterr().out
    assert code == 0
    assert (out_dir / "oldLime.csv").read_text().splitlines() == [
        "loc01,Tilia cordata,337", "loc02,Tilia platyphyllos,212"]
    assert re.search(r"^load_ms=\d+$", out, re.M)
    assert re.search(r"^reason_ms=\d+$", out, re.M)
    assert "derived oldLime: 2" in out
    assert re.search(r"^loading: \d+ ms$", out, re.M)


def test_unstratifiable_exits_1(tmp_path, capsys):
    path = write(tmp_path, "b(a) . p(?x) :- b(?x), ~q(?x) . q(?x) :- b(?x), ~p(?x) .")
    assert main(["run", str(path)]) == 1
    assert "negation cycle p -> q -> p" in capsys.readouterr().err


def test_unsafe_program_exits_1(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, "p(?x) :- q(?y) ."))]) == 1
    assert "unbound" in capsys.readouterr().err


def test_divergent_chase_exits_3(tmp_path, capsys):
    path = write(tmp_path, "s(a, b) . s(?y, !z) :- s(?x, ?y) .")
    assert main(["run", str(path), "--max-facts", "10"]) == 3
    assert "limit" in capsys.readouterr().err


def test_missing_program_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.rls")]) == 2


def test_missing_source_exits_2(tmp_path):
    path = write(tmp_path, '@source t[2]: load-csv("missing.csv") . u(?x) :- t(?x, ?y) .')
    assert main(["run", str(path)]) == 2


def test_refuses_to_overwrite(tmp_path):
    out_dir = tmp_path / "out"
    assert main(["run", str(LIME), "--export-dir", str(out_dir)]) == 0
    assert main(["run", str(LIME), "--export-dir", str(out_dir)]) == 2
    assert main(["run", str(LIME), "--export-dir", str(out_dir), "--overwrite"]) == 0


def test_export_needs_directory():
    with pytest.raises(SystemExit) as err:
        main(["run", str(LIME), "--export", "oldLime"])
    assert err.value.code == 1


def test_selected_export_only(tmp_path):
    out_dir = tmp_path / "out"
    assert main(["run", str(LIME), "--export-dir", str(out_dir), "--export", "lime"]) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == ["lime.csv"]


def test_ntriples_export_needs_arity_3(tmp_path):
    out_dir = tmp_path / "out"
    assert main(["run", str(LIME), "--export-dir", str(out_dir), "--format", "ntriples", "--export", "lime"]) == 2
    assert main(["run", str(LIME), "--export-dir", str(out_dir), "--format", "ntriples",
                 "--export", "oldLime"]) == 0
    assert len((out_dir / "oldLime.nt").read_text().splitlines()) == 2


def test_module_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "trieflow", "run", str(LIME)], capture_output=True, text=True)
    assert result.returncode == 0
    assert "inferred facts: 6" in result.stdout
