import json
from dataclasses import replace

import pytest

from ringecho.cli import main
from ringecho.scenarios import (
    FIG2,
    Scenario,
    ScenarioError,
    parse_config,
    resolve,
    run,
    sweep,
    sweep_cells,
)

SMALL = """
[scenario]
name = small
engine = both

[array]
count = 9
spacing = 0.5
coupling_ratio = 0.5
finesse = 50

[metrics]
echoes = 2
"""


@pytest.fixture
def small():
    return parse_config(SMALL)[0]


def test_parse_documented_example():
    from ringecho import scenarios
    text = scenarios.__doc__.split("::", 1)[1].split("All physics")[0]
    text = "\n".join(line[4:] for line in text.splitlines())
    sc, grid = parse_config(text)
    assert sc.coupling == 0.05 and sc.coupling_ratio is None and sc.finesse == 50.0
    assert sc.t_off == 82.8
    assert grid == {"coupling_ratio": [0.1, 0.25, 0.5], "finesse": [10.0, 50.0, 500.0]}


def test_parse_errors_name_the_key():
    with pytest.raises(ScenarioError) as info:
        parse_config("[array]\ncount = many\n")
    assert info.value.key == "count"
    with pytest.raises(ScenarioError) as info:
        parse_config("[array]\ncolour = red\n")
    assert info.value.key == "array.colour"
    with pytest.raises(ScenarioError) as info:
        parse_config("[extras]\nx = 1\n")
    assert info.value.key == "extras"


def test_resolve_checks(small):
    with pytest.raises(ScenarioError) as info:
        resolve(replace(small, engine="magic"))
    assert info.value.key == "scenario.engine"
    with pytest.raises(ScenarioError) as info:
        resolve(replace(small, engine="spectral", t_on=5.0, t_off=10.0))
    assert info.value.key == "scenario.engine"
    with pytest.raises(ScenarioError):
        resolve(replace(small, ordering="sideways"))
    with pytest.raises(ScenarioError):
        resolve(replace(small, count=0))


def test_resolve_applies_linewidth_convention(small):
    res = resolve(small)
    # quoted coupling 0.25, quoted linewidth 0.5 / 100
    assert res.spec.couplings[0] == pytest.approx(0.5)
    assert res.spec.linewidths[0] == pytest.approx(0.0025)
    eq = resolve(replace(small, convention="equation"))
    assert eq.spec.couplings[0] == pytest.approx(0.25)


def test_shuffled_ordering_is_seeded(small):
    a = resolve(replace(small, ordering="shuffle:3")).spec.detunings
    b = resolve(replace(small, ordering="shuffle:3")).spec.detunings
    assert list(a) == list(b)
    assert sorted(a) == sorted(resolve(small).spec.detunings)


def test_run_writes_outputs_and_is_deterministic(small, tmp_path):
    first = run(small, tmp_path / "a")
    second = run(small, tmp_path / "b")
    assert set(first.files) == {"trace", "occupations", "echoes", "manifest"}
    for key in first.files:
        with open(first.files[key], "rb") as fa, open(second.files[key], "rb") as fb:
            assert fa.read() == fb.read(), key
    manifest = json.loads(open(first.files["manifest"]).read())
    assert manifest["fidelity_threshold"] == 0.98
    assert manifest["ode_spectral_rel_l2"] < 1e-4
    assert manifest["valid"]
    header = open(first.files["occupations"]).readline().strip().split(",")
    assert header[0] == "t" and header[-1] == "P_total" and len(header) == 11


def test_single_point_sweep_equals_run(small, tmp_path):
    spectral = replace(small, engine="spectral")
    header, rows = sweep(spectral, {"finesse": [50.0]})
    result = run(spectral, tmp_path, occupations=False)
    # only the cell name differs
    assert rows[0][0] == 50.0
    assert rows[0][2:] == result.summary_row()[1:]
    assert header[0] == "finesse"


def test_sweep_guard(small):
    grid = {"finesse": list(range(1, 102)), "coupling_ratio": [0.1] * 100}
    with pytest.raises(ScenarioError):
        sweep_cells(small, grid)
    assert len(sweep_cells(small, grid, allow_large=True)) == 10100


def test_fig2_defaults():
    assert (FIG2.count, FIG2.spacing, FIG2.finesse, FIG2.coupling) == (61, 0.1, 50.0, 0.05)
    assert FIG2.shape == "three_pulse"


def test_cli_validate_and_errors(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(SMALL)
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text(SMALL.replace("finesse = 50", "finesse = -3"))
    capsys.readouterr()
    assert main(["validate", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation" and err["key"] == "array.finesse"
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_cli_run_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text(SMALL.replace("engine = both", "engine = spectral")
                   + "\n[sweep]\nfinesse = 20, 50\n")
    out = tmp_path / "out"
    assert main(["--out", str(out), "run", str(cfg), "--no-occupations"]) == 0
    assert (out / "small_trace.csv").exists()
    assert not (out / "small_occupations.csv").exists()
    assert main(["--out", str(out), "sweep", str(cfg)]) == 0
    lines = (out / "small_sweep.csv").read_text().splitlines()
    assert len(lines) == 3


def test_cli_sweep_without_grid(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text(SMALL)
    assert main(["--out", str(tmp_path), "sweep", str(cfg)]) == 2
    assert json.loads(capsys.readouterr().err)["key"] == "sweep"


def test_unwritable_output_is_io_error(tmp_path, small, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text(SMALL.replace("engine = both", "engine = spectral"))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--out", str(blocker / "sub"), "run", str(cfg)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_scenario_defaults_are_hashable():
    assert hash(Scenario()) == hash(Scenario())
