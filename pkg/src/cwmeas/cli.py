"""Command-line front end.

    cwmeas <scenario> [--config PATH] [--out DIR] [--seed N]

Exit status: 0 on success, 2 on invalid configuration, 3 when a runtime guard
(step-size or stability check) stops a simulation.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dephasing, oracle, registration, thermo
from .config import SCENARIOS, ConfigError, parse_config
from .errors import ConfigurationError, DomainError, ValidationError
from .io import emit_csv, format_value

log = logging.getLogger("cwmeas")

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3


def _fmt(v):
    if isinstance(v, complex):
        format_value(v.real), format_value(v.imag)
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        format_value(v)  # rejects nan/inf
        return repr(v)
    return "none" if v is None else str(v)


def write_summary(out: Path, config, scalars: dict) -> Path:
    lines = [f"version = cwmeas {__version__}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in config.resolved().items()]
    lines += [f"{k} = {_fmt(v)}" for k, v in scalars.items()]
    path = out / "summary.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _free_energy(cfg, out):
    p, o = cfg.params, cfg.options
    files, scalars = [], {}
    for g in o["curve.g_values"]:
        curve = thermo.export_curve(p.T, g, o["curve.sector"], o["curve.grid_size"], p.J)
        path = out / f"free_energy_g{g:g}.csv"
        files.append(emit_csv(curve.rows(), path, curve.header, [curve.comment()]))
        tops = [sp.m for sp in thermo.stationary_points(p.T, g, curve.s, p.J) if sp.kind == "maximum"]
        scalars[f"g={g:g}.maxima"] = tuple(tops) or "none"
    scalars.update(_thermo_scalars(p))
    return files, scalars


def _thermo_scalars(p):
    out = {}
    try:
        out["g_c"] = thermo.critical_coupling(p.T, p.J)
    except DomainError:
        out["g_c"] = "none (T >= 0.75 J)"
    try:
        out["m_F"] = thermo.ferromagnetic_magnetization(p.T, 0.0, 1, p.J)
    except DomainError:
        out["m_F"] = "none"
    return out


def _critical(cfg, out):
    p = cfg.params
    temps = sorted({p.T, *cfg.options["critical.T_values"]})
    rows = []
    for T in temps:
        m_star, _ = thermo.inflection_points(T, p.J)
        rows.append((T, m_star, thermo.critical_coupling(T, p.J)))
    path = emit_csv(rows, out / "critical_coupling.csv", ("T", "m_star", "g_c"))
    scalars = {"g_c": thermo.critical_coupling(p.T, p.J), "m_star": thermo.inflection_points(p.T, p.J)[0]}
    scalars.update({k: v for k, v in _thermo_scalars(p).items() if k != "g_c"})
    return [path], scalars


def _dephasing_scalars(dp):
    out = {"tau": dp.tau, "t_1": dp.t1, "characteristic_time": dephasing.characteristic_time(dp)}
    if dp.theta is not None:
        out["theta"] = dp.theta
        out["t_B"] = dephasing.bath_onset_time(dp)
        out["recurrences_suppressed"] = dephasing.recurrences_suppressed(dp)
    return out


def _dephase(cfg, out):
    p, o = cfg.params, cfg.options
    if p.n != 1:
        raise ValidationError("model.n: the dephase scenario traces a single tested spin (n = 1)")
    dp = dephasing.DephasingParams.from_model(p, o["dephase.theta"])
    t_max = o["dephase.t_max"] or 1.5 * dp.t1
    t = np.linspace(0.0, t_max, o["dephase.points"])
    header, rows = dephasing.time_series(dp, t)
    path = emit_csv(rows, out / "dephasing.csv", header)
    return [path], _dephasing_scalars(dp)


def _register(cfg, out):
    p, sch = cfg.params, cfg.schedule
    res = registration.run_measurement(
        cfg.rho0, p, sch.t_couple, sch.t_relax, sch.dt, snapshots_per_phase=4
    )
    files, scalars = [], {"p_up": res.p_up, "p_down": res.p_down, "off_diagonal": res.off_diagonal}
    for s, sec in res.sectors.items():
        rows = [r for t, d in sec.snapshots for r in d.rows(t)]
        files.append(emit_csv(rows, out / f"distribution_s{s:+d}.csv", ("t", "m", "p")))
        tag = f"sector{s:+d}"
        scalars[f"{tag}.status"] = str(sec.classification)
        scalars[f"{tag}.mean_m"] = sec.distribution.mean()
        scalars[f"{tag}.mean_abs_m"] = sec.distribution.mean_abs()
        scalars[f"{tag}.dissipated_F"] = sec.dissipated_free_energy
    scalars.update(_thermo_scalars(p))
    if p.g > 0 and p.n == 1:
        scalars.update(_dephasing_scalars(dephasing.DephasingParams.from_model(p)))
    return files, scalars


def _measure(cfg, out):
    p, sch, smp = cfg.params, cfg.schedule, cfg.sampling
    res = registration.sample_trajectories(
        cfg.rho0, p, smp.n_runs, smp.seed, sch.t_couple, sch.t_relax
    )
    rec_rows = [
        (r.run, r.sector, "none" if r.pointer_sign is None else f"{r.pointer_sign:+d}",
         r.status, r.dissipated_free_energy, r.seed)
        for r in res.records
    ]
    files = [
        emit_csv(rec_rows, out / "records.csv", ("run", "sector", "pointer", "status", "dissipated_F", "seed")),
        emit_csv(
            [(k, v, v / smp.n_runs) for k, v in res.counts.items()],
            out / "counts.csv", ("outcome", "count", "fraction"),
        ),
    ]
    scalars = {"born.r_uu0": cfg.rho0.r_uu, "born.r_dd0": cfg.rho0.r_dd}
    scalars.update({f"fraction.{k}": v / smp.n_runs for k, v in res.counts.items()})
    scalars.update(_thermo_scalars(p))
    return files, scalars


def _oracle(cfg, out):
    p, o = cfg.params, cfg.options
    t = np.linspace(0.0, np.pi / p.g, o["oracle.points"])
    rows, worst = [], 0.0
    for N in (int(x) for x in o["oracle.N_values"]):
        closed = np.cos(2 * p.g * t) ** N
        for quartic in (False, True):
            enum = oracle.enumerate_truncation_factor(N, p.g, t, include_quartic=quartic, J=p.J)
            err = np.abs(enum - closed)
            worst = max(worst, float(err.max()))
            rows += [(N, int(quartic), ti, e, c, d) for ti, e, c, d in zip(t, enum, closed, err)]
    files = [emit_csv(rows, out / "oracle_truncation.csv", ("N", "quartic", "t", "enumerated", "closed_form", "abs_error"))]
    t_max = o["oracle.t_max"] or 10 / p.g
    traj = oracle.evolve_nonideal(o["oracle.nonideal_N"], p.g, p.b_x, cfg.rho0, t_max, o["oracle.dt"], J=p.J)
    files.append(emit_csv(traj.rows(), out / "nonideal.csv", traj.header))
    scalars = {
        "truncation.max_abs_error": worst,
        "nonideal.max_delta": float(traj.delta.max()),
        "nonideal.norm_drift": traj.norm_drift,
    }
    return files, scalars


RUNNERS = {
    "free-energy": _free_energy,
    "critical-coupling": _critical,
    "dephase": _dephase,
    "register": _register,
    "measure": _measure,
    "oracle-check": _oracle,
}


def run_scenario(cfg, out=None) -> tuple[int, list[Path]]:
    """Run one scenario; returns (exit status, files written)."""
    out = Path(out) if out is not None else cfg.output
    try:
        out.mkdir(parents=True, exist_ok=True)
        files, scalars = RUNNERS[cfg.scenario](cfg, out)
    except ConfigurationError as exc:
        log.error("runtime guard: %s", exc)
        return EXIT_GUARD, []
    except (ValidationError, DomainError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID, []
    files.append(write_summary(out, cfg, scalars))
    return EXIT_OK, files


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cwmeas", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", type=Path, help="key = value configuration file")
    ap.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides sampling.seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError([f"--seed: must be >= 0 (got {args.seed})"])
            cfg = dataclasses.replace(cfg, sampling=dataclasses.replace(cfg.sampling, seed=args.seed))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"cwmeas: {problem}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cwmeas: {exc}", file=sys.stderr)
        return EXIT_INVALID

    status, files = run_scenario(cfg, args.out)
    for f in files:
        log.info("wrote %s", f)
    return status


if __name__ == "__main__":
    sys.exit(main())
