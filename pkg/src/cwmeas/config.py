"""Scenario configuration: a flat ``key = value`` document with dotted section
prefixes, for example::

    scenario = register
    model.g = 0.05
    rho0.bloch = 0, 0, 1
    schedule.t_couple = 2000

Model keys may also be given bare (``g = 0.05``). ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ValidationError
from .qm import SpinDensityMatrix, pure_state, validate
from .thermo import ModelParams

SCENARIOS = ("free-energy", "critical-coupling", "dephase", "register", "measure", "oracle-check")


class ConfigError(ValidationError):
    """Parse or validation failure; ``problems`` lists every offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _int(v):
    x = float(v)
    if not x.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(x)


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _opt_float(v):
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


# key -> (converter, default)
KEYS = {
    "scenario": (str, None),
    "model.N": (_int, 100),
    "model.J": (float, 1.0),
    "model.T": (float, 0.2),
    "model.gamma": (float, 0.01),
    "model.Gamma": (float, 10.0),
    "model.g": (float, 0.05),
    "model.n": (_int, 1),
    "model.b_x": (float, 0.0),
    "rho0.bloch": (_floats, None),
    "rho0.r_uu": (float, None),
    "rho0.r_ud": (complex, 0j),
    "schedule.t_couple": (_opt_float, None),
    "schedule.t_relax": (_opt_float, None),
    "schedule.dt": (_opt_float, None),
    "sampling.n_runs": (_int, 10000),
    "sampling.seed": (_int, 1),
    "output.dir": (str, "out"),
    "curve.g_values": (_floats, (0.0, 0.02, 0.05)),
    "curve.grid_size": (_int, 2001),
    "curve.sector": (_int, 1),
    "critical.T_values": (_floats, ()),
    "dephase.t_max": (_opt_float, None),
    "dephase.points": (_int, 2001),
    "dephase.theta": (_opt_float, None),
    "oracle.N_values": (_floats, (1, 2, 5, 10, 16, 20)),
    "oracle.points": (_int, 50),
    "oracle.nonideal_N": (_int, 8),
    "oracle.t_max": (_opt_float, None),
    "oracle.dt": (float, 0.05),
}
MODEL_FIELDS = ("N", "J", "T", "gamma", "Gamma", "g", "n", "b_x")


@dataclass(frozen=True)
class Schedule:
    t_couple: float
    t_relax: float
    dt: Optional[float] = None


@dataclass(frozen=True)
class Sampling:
    n_runs: int = 10000
    seed: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: ModelParams
    rho0: SpinDensityMatrix
    schedule: Schedule
    sampling: Sampling
    output: Path
    options: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Flat view of every resolved setting, in a fixed order."""
        out = {"scenario": self.scenario}
        for f in MODEL_FIELDS:
            out[f"model.{f}"] = getattr(self.params, f)
        out["rho0.r_uu"] = self.rho0.r_uu
        out["rho0.r_ud"] = complex(self.rho0.r_ud)
        out["schedule.t_couple"] = self.schedule.t_couple
        out["schedule.t_relax"] = self.schedule.t_relax
        out["schedule.dt"] = self.schedule.dt
        out["sampling.n_runs"] = self.sampling.n_runs
        out["sampling.seed"] = self.sampling.seed
        out.update(sorted(self.options.items()))
        return out


def _tokenize(text: str):
    entries, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (x.strip() for x in line.split("=", 1))
        if key in MODEL_FIELDS:
            key = f"model.{key}"
        if key not in KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in entries:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        entries[key] = (lineno, value)
    return entries, problems


def parse_config(text: str, scenario: Optional[str] = None) -> ScenarioConfig:
    """Parse and validate a configuration document, applying defaults.

    ``scenario`` (from the command line) is used when the document has no
    ``scenario`` key and must agree with it otherwise.
    """
    entries, problems = _tokenize(text)
    values = {}
    for key, (lineno, raw) in entries.items():
        conv, _ = KEYS[key]
        try:
            values[key] = conv(raw)
        except ValueError as exc:
            problems.append(f"line {lineno}: bad value for {key!r}: {exc}")

    def get(key):
        return values.get(key, KEYS[key][1])

    sc = get("scenario")
    if scenario is not None:
        if sc is not None and sc != scenario:
            problems.append(f"scenario: document says {sc!r} but {scenario!r} was requested")
        sc = scenario
    if sc is None:
        problems.append("scenario: missing")
    elif sc not in SCENARIOS:
        problems.append(f"scenario: unknown scenario {sc!r} (choose from {', '.join(SCENARIOS)})")

    model = {f: get(f"model.{f}") for f in MODEL_FIELDS}
    for f, v in model.items():
        if isinstance(v, float) and not math.isfinite(v):
            problems.append(f"model.{f}: must be finite")
    if not model["g"] >= 0:
        problems.append(f"model.g: must be >= 0 (got {model['g']!r})")
    if not model["T"] > 0:
        problems.append(f"model.T: must be > 0 (got {model['T']!r})")
    if not model["gamma"] > 0:
        problems.append(f"model.gamma: must be > 0 (got {model['gamma']!r})")
    if not model["Gamma"] > 0:
        problems.append(f"model.Gamma: must be > 0 (got {model['Gamma']!r})")
    if not model["J"] > 0:
        problems.append(f"model.J: must be > 0 (got {model['J']!r})")
    if model["N"] < 2:
        problems.append(f"model.N: must be >= 2 (got {model['N']!r})")
    if model["n"] < 1:
        problems.append(f"model.n: must be >= 1 (got {model['n']!r})")

    rho0 = None
    bloch, r_uu = get("rho0.bloch"), get("rho0.r_uu")
    if bloch is not None and r_uu is not None:
        problems.append("rho0: give either rho0.bloch or rho0.r_uu, not both")
    elif bloch is not None:
        try:
            if len(bloch) != 3:
                raise ValidationError("rho0.bloch needs three components")
            x, y, z = bloch
            length = math.sqrt(x * x + y * y + z * z)
            if length > 1 + 1e-9:
                raise ValidationError(f"|bloch| = {length} > 1")
            rho0 = SpinDensityMatrix((1 + z) / 2, (1 - z) / 2, complex(x, -y) / 2)
        except ValidationError as exc:
            problems.append(f"rho0.bloch: {exc}")
    else:
        if r_uu is None:
            rho0 = pure_state((1, 0, 0))
        else:
            rho0 = SpinDensityMatrix(r_uu, 1 - r_uu, get("rho0.r_ud"))
        bad = validate(rho0)
        if bad:
            problems.append("rho0: " + ", ".join(f"{v.invariant} violated by {v.magnitude:.3g}" for v in bad))

    if get("sampling.n_runs") < 1:
        problems.append("sampling.n_runs: must be >= 1")
    if get("sampling.seed") < 0:
        problems.append("sampling.seed: must be >= 0")
    for key in ("schedule.t_couple", "schedule.t_relax", "schedule.dt", "dephase.t_max", "dephase.theta", "oracle.t_max"):
        v = get(key)
        if v is not None and not v > 0:
            problems.append(f"{key}: must be > 0 (got {v!r})")
    if get("curve.grid_size") < 3:
        problems.append("curve.grid_size: must be >= 3")
    if get("curve.sector") not in (1, -1):
        problems.append("curve.sector: must be +1 or -1")
    if get("oracle.dt") <= 0:
        problems.append("oracle.dt: must be > 0")
    if problems:
        raise ConfigError(problems)

    params = ModelParams(**model)
    t_couple = get("schedule.t_couple")
    t_relax = get("schedule.t_relax")
    schedule = Schedule(
        20.0 / params.gamma if t_couple is None else t_couple,
        10.0 / params.gamma if t_relax is None else t_relax,
        get("schedule.dt"),
    )
    options = {k: get(k) for k in KEYS if k.split(".")[0] in ("curve", "critical", "dephase", "oracle")}
    return ScenarioConfig(
        sc, params, rho0, schedule,
        Sampling(get("sampling.n_runs"), get("sampling.seed")),
        Path(get("output.dir")), options,
    )
