import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mflab import cli, experiment
from mflab.experiment import ConfigError, ExperimentConfig

FAST = {"epsilons": [0.5, 0.25], "panel": {"times": [0.25]}, "measure": {"n_angles": 16}}


def _cfg(**over):
    return ExperimentConfig.from_dict({**FAST, **over})


@pytest.mark.parametrize("ext", [".toml", ".json"])
def test_config_roundtrip(tmp_path, ext):
    cfg = _cfg(seed=7, family={"kind": "coherent", "z0": [[0.6, 0.0], [0.0, 0.5]]})
    path = tmp_path / f"cfg{ext}"
    cfg.dump(path)
    back = ExperimentConfig.load(path)
    assert back.to_dict() == cfg.to_dict()
    path2 = tmp_path / f"again{ext}"
    back.dump(path2)
    assert path.read_bytes() == path2.read_bytes()


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5, unique=True))
def test_epsilon_order_validated(eps):
    ordered = sorted(eps, reverse=True)
    ExperimentConfig.from_dict({"epsilons": ordered})
    if len(eps) > 1:
        with pytest.raises(ConfigError, match="strictly decreasing"):
            ExperimentConfig.from_dict({"epsilons": sorted(eps)})


@pytest.mark.parametrize("bad", [
    {"epsilons": [0.5, 0.5]},
    {"epsilons": []},
    {"n_max": 0},
    {"modes": 0},
    {"potential": {"kind": "yukawa"}},
    {"family": {"kind": "squeezed"}},
    {"flow": {"integrator": "euler"}},
    {"panel": {"xis": [[[5.0, 0.0], [0.0, 0.0]]]}},
    {"panel": {"xis": [[[0.5, 0.0]]]}},
    {"colour": "blue"},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_load_rejects_unknown_extension(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("seed: 1")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


def test_convergence_table_schema(tmp_path):
    table = experiment.run_convergence(_cfg(), tmp_path)
    assert table.columns == experiment.CONVERGENCE_COLUMNS
    assert len(table.rows) == 2 * 1 * 6
    header = (tmp_path / "convergence.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(experiment.CONVERGENCE_COLUMNS)
    assert (tmp_path / "convergence.svg").read_text().startswith("<svg")
    sup = [r[1] for r in table.summary]
    assert sup[1] < sup[0]


def test_zero_panel_gives_zero_error(tmp_path):
    cfg = _cfg(panel={"xis": [[[0.0, 0.0], [0.0, 0.0]]], "times": [0.25, 0.5]})
    table = experiment.convergence_sweep(cfg)
    # Tr[rho W(0)] = Tr rho = 1 up to rounding
    assert all(r[-1] < 1e-15 for r in table.rows)


def test_free_coherent_error_is_gaussian_broadening():
    cfg = _cfg(potential={"kind": "constant", "strength": 0.0},
               family={"kind": "coherent", "z0": [[0.6, 0.0], [0.0, 0.5]], "cutoff_factor": 16.0},
               epsilons=[0.5, 0.25, 0.125])
    table = experiment.convergence_sweep(cfg)
    xis = cfg.panel().xis
    for eps, sup, _ in table.summary:
        expect = max(abs(1 - math.exp(-eps * np.vdot(x, x).real / 4)) for x in xis)
        assert sup == pytest.approx(expect, abs=1e-9)


def test_failing_stage_is_named():
    cfg = _cfg(family={"kind": "coherent", "z0": [[0.6, 0.0], [0.0, 0.5]]}, n_max=1)
    with pytest.raises(experiment.StageError, match="stage 'state'"):
        experiment.convergence_sweep(cfg)


def test_hartree_zero_potential(tmp_path):
    cfg = _cfg(potential={"kind": "constant", "strength": 0.0}, hartree={"t1": 0.1})
    table = experiment.run_hartree(cfg, tmp_path)
    assert max(table.column("energy_drift")) < 1e-13
    assert table.column("t")[-1] == pytest.approx(0.1)


def test_hartree_soft_coulomb_drift(tmp_path):
    table = experiment.run_hartree(_cfg(hartree={"t1": 0.2}), tmp_path)
    assert max(table.column("energy_drift")) < 1e-8
    assert max(table.column("mass_drift")) < 1e-8


def test_invariant_suite_passes():
    results = experiment.invariant_suite(_cfg())
    assert {r[0] for r in results} >= {"ccr", "weyl_product", "wick_composition", "hartree_energy_drift"}
    assert all(r[3] for r in results), [r for r in results if not r[3]]


def test_plot_empty_table(tmp_path):
    with pytest.raises(ValueError, match="empty table"):
        experiment.plot(experiment.ResultTable(["epsilon", "sup_error"], []), "convergence", tmp_path / "x.svg")


def test_plot_is_deterministic(tmp_path):
    t = experiment.ResultTable(["epsilon", "sup_error"], [[0.5, 0.1], [0.25, 0.05]])
    experiment.plot(t, "convergence", tmp_path / "a.svg")
    experiment.plot(t, "convergence", tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


# command line


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, FAST)
    assert cli.main(["check-invariants", "--config", good, "--output", str(tmp_path / "o")]) == 0
    bad = _write(tmp_path, {"epsilons": [0.1, 0.2]}, "bad.json")
    assert cli.main(["run-convergence", "--config", bad]) == 2
    assert "strictly decreasing" in capsys.readouterr().err
    # an impossible tolerance makes the suite fail
    strict = _write(tmp_path, {**FAST, "tolerances": {"ccr": 0.0}}, "strict.json")
    assert cli.main(["check-invariants", "--config", strict, "--output", str(tmp_path / "o")]) == 1


def test_cli_outputs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, FAST)
    for run in ("a", "b"):
        assert cli.main(["run-convergence", "--config", cfg, "--seed", "3", "--output", str(tmp_path / run)]) == 0
        assert cli.main(["run-hartree", "--config", cfg, "--output", str(tmp_path / run)]) == 0
    for name in ("convergence.csv", "convergence_summary.csv", "convergence.svg", "hartree.csv", "hartree.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_plot(tmp_path):
    cfg = _write(tmp_path, FAST)
    cli.main(["run-hartree", "--config", cfg, "--output", str(tmp_path)])
    out = tmp_path / "h.svg"
    assert cli.main(["plot", str(tmp_path / "hartree.csv"), "--out", str(out)]) == 0
    assert out.read_text().count("<polyline") == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("epsilon,sup_error\n")
    assert cli.main(["plot", str(empty)]) == 2


def test_seed_override(tmp_path):
    cfg = _write(tmp_path, FAST)
    args = cli.build_parser().parse_args(["check-invariants", "--config", cfg, "--seed", "11"])
    assert cli._load(args)["seed"] == 11
