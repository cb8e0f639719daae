import math

import pytest

from cwmeas import __version__
from cwmeas.cli import main, run_scenario
from cwmeas.config import ConfigError, parse_config
from cwmeas.io import emit_csv, format_value, read_csv


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults_resolve():
    cfg = parse_config("", "register")
    assert cfg.params.N == 100 and cfg.params.g == 0.05
    assert (cfg.schedule.t_couple, cfg.schedule.t_relax) == (2000.0, 1000.0)
    assert cfg.rho0.r_ud == 0.5


def test_bare_and_dotted_keys_agree():
    a = parse_config("g = 0.02\nT = 0.3", "register")
    b = parse_config("model.g = 0.02\nmodel.T = 0.3  # comment", "register")
    assert a.params == b.params


def test_all_problems_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config("foo = 1\ng = -0.1\nrho0.r_uu = 1.5\n", "measure")
    text = " | ".join(exc.value.problems)
    assert "unknown key 'foo'" in text
    assert "model.g" in text
    assert "rho0" in text and "positivity" in text


def test_bloch_and_scenario_checks():
    cfg = parse_config("rho0.bloch = 0, 0, 1", "measure")
    assert (cfg.rho0.r_uu, cfg.rho0.r_dd) == (1.0, 0.0)
    with pytest.raises(ConfigError, match="bloch"):
        parse_config("rho0.bloch = 1, 1, 0", "measure")
    with pytest.raises(ConfigError, match="requested"):
        parse_config("scenario = dephase", "measure")


def test_format_value_roundtrip():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, math.pi):
        assert float(format_value(x)) == x
    with pytest.raises(ValueError):
        format_value(float("nan"))
    with pytest.raises(ValueError):
        format_value(float("inf"))


def test_empty_csv_is_header_only(tmp_path):
    path = emit_csv([], tmp_path / "e.csv", ("a", "b"))
    assert path.read_bytes() == b"a,b\n"
    header, rows, _ = read_csv(path)
    assert header == ["a", "b"] and rows == []


def test_exit_code_invalid(tmp_path, capsys):
    assert main(["measure", "--config", write(tmp_path, "foo = 1\ng = -0.1\n")]) == 2
    err = capsys.readouterr().err
    assert "foo" in err and "model.g" in err


def test_exit_code_missing_config(tmp_path):
    assert main(["measure", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_exit_code_guard(tmp_path):
    cfg = write(tmp_path, "schedule.t_couple = 10\nschedule.t_relax = 10\nschedule.dt = 5\n")
    assert main(["register", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_exit_code_domain(tmp_path):
    # dephase traces a single tested spin
    assert main(["dephase", "--config", write(tmp_path, "n = 2\n"), "--out", str(tmp_path / "o")]) == 2


SMALL = {
    "free-energy": "",
    "critical-coupling": "critical.T_values = 0.1, 0.3\n",
    "dephase": "N = 1000\ndephase.theta = 10000\ndephase.points = 101\n",
    "register": "schedule.t_couple = 200\nschedule.t_relax = 100\n",
    "measure": "sampling.n_runs = 200\nschedule.t_couple = 300\nschedule.t_relax = 100\n",
    "oracle-check": "oracle.N_values = 1, 2, 5\noracle.nonideal_N = 4\noracle.t_max = 20\n",
}


@pytest.mark.parametrize("scenario", sorted(SMALL))
def test_scenarios_run_and_rerun_identically(tmp_path, scenario):
    cfg = write(tmp_path, SMALL[scenario])
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main([scenario, "--config", cfg, "--out", str(out), "--seed", "4"]) == 0
    files = sorted(p.name for p in outs[0].iterdir())
    assert "summary.txt" in files and len(files) >= 2
    for name in files:
        a, b = (o / name for o in outs)
        if name == "summary.txt":
            la, lb = a.read_text().splitlines(), b.read_text().splitlines()
            assert la[0] == f"version = cwmeas {__version__}"
            assert la[1:] == lb[1:]
        else:
            assert a.read_bytes() == b.read_bytes()
            header, rows, _ = read_csv(a)
            for row in rows:
                assert len(row) == len(header)
                for v in row:
                    try:
                        assert math.isfinite(float(v))
                    except ValueError:
                        pass  # labels such as outcome names


def test_free_energy_files(tmp_path):
    cfg = parse_config("", "free-energy")
    status, files = run_scenario(cfg, tmp_path)
    assert status == 0
    names = {f.name for f in files}
    assert {"free_energy_g0.csv", "free_energy_g0.02.csv", "free_energy_g0.05.csv"} <= names
    header, rows, comments = read_csv(tmp_path / "free_energy_g0.05.csv")
    assert header == ["m", "F_per_spin"] and len(rows) == 2001
    assert comments == ["T=0.2,g=0.05,s=+1"]


def test_measure_seed_changes_records(tmp_path):
    cfg = write(tmp_path, SMALL["measure"])
    main(["measure", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["measure", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "records.csv").read_bytes() != (tmp_path / "b" / "records.csv").read_bytes()
