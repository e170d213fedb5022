import json
from pathlib import Path

import numpy as np
import pytest

from ladderqed.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from ladderqed.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "docs" / "configs"


def test_defaults():
    cfg = parse_config("")
    assert cfg.system.omega10 == 7.558
    assert cfg.drive.omega_d == pytest.approx(7.314)
    assert cfg.sweep is None and cfg.probe is None


def test_full_config():
    cfg = parse_config(
        """
[system]
preset = none
omega10 = 5.0
omega21 = 4.8
gamma10 = 0.01
gamma21 = 0.02

[drive]
frequency = omega10
mode = field
value = 0.3

[probe]
omega_p = 5.1

[sweep]
drive_min = 0
drive_max = 0.2
drive_n = 3
outputs = transmission_map, populations

[run]
threads = 2
nonideal = yes
"""
    )
    assert cfg.system.gamma10_nr == 0.0
    assert cfg.drive.omega_d == 5.0 and cfg.drive.amplitude_mode == "field"
    assert cfg.probe.amplitude > 0
    assert cfg.sweep.outputs == ("transmission_map", "populations") and cfg.sweep.nonideal
    assert cfg.threads == 2


@pytest.mark.parametrize(
    "text,line",
    [
        ("[system]\nomega10 = 7\n\n[sweep]\ndrive_n = many\n", 5),
        ("[system]\ncolour = blue\n", 2),
        ("\n[nonsense]\na = 1\n", 2),
        ("[run]\nthreads = 0\n", 2),
        ("[sweep]\noutputs = transmission_map, heatmap\n", 2),
        ("[drive]\nfrequency = omega10\nmode = dbm\nvalue = -110\n[fit]\nfixed = gamma99\n", 6),
        ("[drive]\nmode = volts\n", 2),
        ("[probe]\namplitude = 1e-3\n", 1),
        ("[system]\ngamma10 = nan\n", 2),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError, match=rf"<config>:{line}:"):
        parse_config(text)


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("no section header\n")


def test_overrides():
    cfg = parse_config("[system]\ngamma21 = 0.08\n", overrides=["system.gamma21=0", "drive.value=0.2"])
    assert cfg.system.gamma21 == 0 and cfg.drive.value == 0.2
    with pytest.raises(ConfigError):
        parse_config("", overrides=["novalue"])
    with pytest.raises(ConfigError):
        parse_config("", overrides=["run.colour=red"])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.ini")))
def test_bundled_configs_parse(name):
    load_config(CONFIGS / name)


def _run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_cmd_dressed(tmp_path):
    code = _run(tmp_path, "dressed", "--set", "sweep.drive_min=0", "--set", "sweep.drive_max=1",
                "--set", "sweep.drive_n=5")
    assert code == EXIT_OK
    rows = (tmp_path / "overlaps.csv").read_text().splitlines()
    header = rows[1].split(",")
    for row in rows[3:]:
        vals = dict(zip(header, row.split(",")))
        assert float(vals["overlap_0m"]) == pytest.approx(2 / 3, abs=1e-12)
        assert float(vals["overlap_1m"]) == pytest.approx(0.0, abs=1e-12)
        assert float(vals["overlap_2m"]) == pytest.approx(1 / 3, abs=1e-12)
    sb = (tmp_path / "sidebands.csv").read_text().splitlines()[2:]
    assert len(sb) == 6 * 5
    for k in range(0, len(sb), 2):
        a, b = float(sb[k].split(",")[4]), float(sb[k + 1].split(",")[4])
        assert abs(a + b - 2 * 7.314) < 1e-12


def test_cmd_dressed_single_zero_drive(tmp_path):
    assert _run(tmp_path, "dressed") == EXIT_OK
    rows = (tmp_path / "overlaps.csv").read_text().splitlines()
    vals = [float(v) for v in rows[2].split(",")[2:-1]]
    assert np.array_equal(np.array(vals).reshape(3, 3), [[1, 0, 0], [0, 0, 1], [0, 1, 0]])


def test_cmd_populations(tmp_path):
    code = _run(tmp_path, "populations", "--set", "sweep.drive_min=0", "--set", "sweep.drive_max=3",
                "--set", "sweep.drive_n=4")
    assert code == EXIT_OK
    rows = (tmp_path / "populations.csv").read_text().splitlines()
    header = rows[1].split(",")
    first = dict(zip(header, map(float, rows[2].split(","))))
    last = dict(zip(header, map(float, rows[-1].split(","))))
    assert first["rho_gg"] + first["rho_mm"] + first["rho_ee"] == pytest.approx(1.0, abs=1e-12)
    for k in ("rho_gg", "rho_mm", "rho_ee"):
        assert last[k] == pytest.approx(1 / 3, abs=0.05)
    assert max(last["abs_rho_gm"], last["abs_rho_ge"], last["abs_rho_me"]) < max(
        first["abs_rho_gm"], first["abs_rho_ge"], first["abs_rho_me"], 0.02
    )


def test_cmd_map_reproducible(tmp_path):
    args = ["map", "-c", str(CONFIGS / "two_photon_map.ini"), "--set", "sweep.drive_n=4", "--set", "sweep.probe_n=9"]
    assert _run(tmp_path / "a", *args, "--threads", "1") == EXIT_OK
    assert _run(tmp_path / "b", *args, "--threads", "3") == EXIT_OK
    for name in ("map.csv", "map_matrix.csv", "drive_table.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len((tmp_path / "a" / "map.csv").read_text().splitlines()) == 2 + 4 * 9


def test_cmd_map_needs_sweep(tmp_path, capsys):
    assert _run(tmp_path, "map") == EXIT_CONFIG
    assert "sweep" in capsys.readouterr().err


def test_cmd_sidebands(tmp_path):
    assert _run(tmp_path, "sidebands", "--set", "drive.value=0.5", "--set", "system.gamma10_nr=0") == EXIT_OK
    lines = (tmp_path / "sidebands.csv").read_text().splitlines()
    assert len(lines) == 7
    kinds = {tuple(l.split(",")[:2]): l.split(",")[3] for l in lines[1:]}
    assert kinds[("m", "e")] == "gain" and kinds[("e", "m")] == "loss"


def test_synth_and_fit(tmp_path):
    cfg = str(CONFIGS / "drive_transmission_fit.ini")
    assert _run(tmp_path, "synth", "-c", cfg) == EXIT_OK
    first = (tmp_path / "traces.csv").read_bytes()
    assert _run(tmp_path, "synth", "-c", cfg) == EXIT_OK
    assert (tmp_path / "traces.csv").read_bytes() == first
    assert _run(tmp_path, "fit", "-c", cfg, "--data", str(tmp_path / "traces.csv")) == EXIT_OK
    out = json.loads((tmp_path / "fit.json").read_text())
    assert out["params"]["gamma10"] == pytest.approx(0.040, rel=0.05)
    assert out["converged"]


def test_fit_errors(tmp_path):
    assert _run(tmp_path, "fit") == EXIT_CONFIG
    assert _run(tmp_path, "fit", "--data", str(tmp_path / "missing.csv")) == EXIT_CONFIG
    bad = tmp_path / "bad.csv"
    bad.write_text("power_dbm,detuning_ghz,re_t,im_t\n1,2,3\n")
    assert _run(tmp_path, "fit", "--data", str(bad)) == EXIT_CONFIG


def test_selfcheck_passes(tmp_path, capsys):
    assert _run(tmp_path, "selfcheck", "--points", "2") == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    assert (tmp_path / "selfcheck.txt").exists()


def test_selfcheck_negative_control(tmp_path, capsys):
    assert _run(tmp_path, "selfcheck", "--points", "2", "--corrupt-xi") == EXIT_CHECK
    assert "FAIL oracle equivalence" in capsys.readouterr().out


def test_selfcheck_two_level_config(tmp_path, capsys):
    assert _run(tmp_path, "selfcheck", "--points", "2", "--set", "system.gamma21=0") == EXIT_OK
    assert "PASS two-level equivalence" in capsys.readouterr().out


def test_oracle_command(tmp_path):
    code = _run(tmp_path, "oracle", "--set", "drive.value=0.4", "--set", "probe.omega_p=7.6")
    assert code == EXIT_OK
    assert len((tmp_path / "oracle.csv").read_text().splitlines()) == 11


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    import ladderqed.cli as cli
    from ladderqed.steady import SolverError

    def boom(*a, **k):
        raise SolverError("singular")

    monkeypatch.setattr(cli, "ResponseModel", boom)
    assert _run(tmp_path, "sidebands") == EXIT_SOLVER


def test_bad_threads(tmp_path):
    assert _run(tmp_path, "selfcheck", "--threads", "0") == EXIT_CONFIG


def test_timestamp_flag(tmp_path):
    _run(tmp_path, "populations", "--timestamp")
    assert '"timestamp"' in (tmp_path / "populations.csv").read_text().splitlines()[0]
    _run(tmp_path, "populations")
    assert '"timestamp"' not in (tmp_path / "populations.csv").read_text().splitlines()[0]
