"""Registration: pointer dynamics on the magnetization lattice.

The magnet is described by P_s(m, t) on m in {-1, -1+2/N, ..., 1}, one
distribution per sector s = +-1 of the tested spin. It evolves under a
single-spin-flip heat-bath master equation with rate scale gamma (times in
units of hbar/J, so registration takes a few times 1/gamma):

    W+(m) = gamma * (N - k) / (1 + exp(dE+/T))      m -> m + 2/N
    W-(m) = gamma * k       / (1 + exp(dE-/T))      m -> m - 2/N

where k = N(1+m)/2 counts up spins and E(m) = -N J m^4/4 - N g s m. These
rates satisfy detailed balance with respect to binom(N, k) exp(-E/T).

Two routes are provided: deterministic RK4 integration of the master
equation, and exact-jump kinetic Monte Carlo of single runs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import expit, gammaln

from . import thermo
from .dephasing import DephasingParams, damped_truncation_factor
from .errors import StepSizeError, ValidationError
from .qm import SpinDensityMatrix, validate

STABILITY = 0.1
REGISTERED_MASS = 0.99

REGISTERED = "Registered"
RELAXED = "Relaxed"
UNDECIDED = "Undecided"


def lattice(N: int) -> np.ndarray:
    """Magnetization grid; integer numerators keep it exactly antisymmetric."""
    return (2 * np.arange(N + 1) - N) / N


def magnet_energy(N: int, J: float, g: float, s: int) -> np.ndarray:
    m = lattice(N)
    m2 = m * m  # m**4 is not bitwise even in numpy
    return -(N * J / 4) * (m2 * m2) - N * g * s * m


def log_boltzmann_binomial(N, T, J=1.0, g=0.0, s=1) -> np.ndarray:
    k = np.arange(N + 1)
    log_binom = gammaln(N + 1) - (gammaln(k + 1) + gammaln(N - k + 1))
    return log_binom - magnet_energy(N, J, g, s) / T


def _normalize_log(logw):
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass(frozen=True)
class MagnetizationDistribution:
    N: int
    p: np.ndarray
    sector_weight: float = 1.0
    sector: int = 1

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (self.N + 1,):
            raise ValidationError(f"p must have N+1 = {self.N + 1} entries")
        if np.any(p < -1e-12):
            raise ValidationError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1) > 1e-9:
            raise ValidationError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> np.ndarray:
        return lattice(self.N)

    def mean(self) -> float:
        return float(self.p @ self.m)

    def mean_abs(self) -> float:
        return float(self.p @ np.abs(self.m))

    def std(self) -> float:
        mu = self.mean()
        return math.sqrt(max(float(self.p @ (self.m - mu) ** 2), 0.0))

    def mass_where(self, mask) -> float:
        return float(self.p[mask].sum())

    def mirrored(self) -> "MagnetizationDistribution":
        return MagnetizationDistribution(self.N, self.p[::-1].copy(), self.sector_weight, -self.sector)

    def rows(self, t: float):
        return [(t, m, p) for m, p in zip(self.m.tolist(), self.p.tolist())]


def paramagnetic_cutoff(params) -> Optional[float]:
    """Edge |m| of the metastable paramagnetic basin at g = 0 (the barrier top)."""
    return thermo.barrier_top(params.T, 0.0, 1, params.J)


def initial_distribution(params, restrict_to_basin: bool = True) -> MagnetizationDistribution:
    """Paramagnetic ready state: binom(N, k) exp(-E(m)/T) at g = 0.

    At low T and moderate N the unrestricted weight is dominated by the
    ferromagnetic states at m = +-1, so by default the weight is restricted
    to the metastable basin |m| < m_max, m_max being the barrier top.
    """
    logw = log_boltzmann_binomial(params.N, params.T, params.J)
    if restrict_to_basin:
        cut = paramagnetic_cutoff(params)
        if cut is not None:
            logw = np.where(np.abs(lattice(params.N)) < cut, logw, -np.inf)
    return MagnetizationDistribution(params.N, _normalize_log(logw))


def equilibrium_distribution(params, s=1, g=None) -> MagnetizationDistribution:
    """Full-lattice stationary state of :func:`build_generator` for (T, g, s)."""
    g = params.g if g is None else g
    logw = log_boltzmann_binomial(params.N, params.T, params.J, g, s)
    return MagnetizationDistribution(params.N, _normalize_log(logw), sector=s)


@dataclass(frozen=True)
class RateModel:
    up_rates: np.ndarray
    down_rates: np.ndarray

    def __post_init__(self):
        if np.any(self.up_rates < 0) or np.any(self.down_rates < 0):
            raise ValidationError("rates must be non-negative")
        if self.up_rates[-1] != 0 or self.down_rates[0] != 0:
            raise ValidationError("rates leaving [-1, 1] must vanish")

    @property
    def N(self) -> int:
        return len(self.up_rates) - 1

    @property
    def total(self) -> np.ndarray:
        return self.up_rates + self.down_rates

    @property
    def max_total_rate(self) -> float:
        return float(self.total.max())

    def rhs(self, p: np.ndarray) -> np.ndarray:
        """dP/dt of the master equation.

        The two inflow terms are added before the outflow is subtracted so that
        the m -> -m mirror of a rate model gives the mirrored result bit for bit.
        """
        gain_up = np.zeros_like(p)
        gain_dn = np.zeros_like(p)
        gain_up[1:] = self.up_rates[:-1] * p[:-1]
        gain_dn[:-1] = self.down_rates[1:] * p[1:]
        return (gain_up + gain_dn) - self.total * p

    def matrix(self) -> np.ndarray:
        """Dense generator Q with dP/dt = Q P."""
        q = np.diag(-self.total)
        n = self.N
        q[np.arange(1, n + 1), np.arange(n)] = self.up_rates[:-1]
        q[np.arange(n), np.arange(1, n + 1)] = self.down_rates[1:]
        return q


def build_generator(params, s: int, g_active: float) -> RateModel:
    N, T = params.N, params.T
    e = magnet_energy(N, params.J, g_active, s)
    k = np.arange(N + 1)
    up = np.zeros(N + 1)
    down = np.zeros(N + 1)
    up[:-1] = params.gamma * (N - k[:-1]) * expit(-(e[1:] - e[:-1]) / T)
    down[1:] = params.gamma * k[1:] * expit(-(e[:-1] - e[1:]) / T)
    return RateModel(up, down)


def _steps(duration, dt):
    if duration < 0:
        raise ValidationError("duration must be >= 0")
    if duration == 0:
        return 0, 0.0
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _check_step(rates: RateModel, dt: float):
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    rate = rates.max_total_rate
    # relative slack so that dt = STABILITY / rate itself is accepted
    if dt * rate > STABILITY * (1 + 1e-12):
        raise StepSizeError(
            f"dt * max_total_rate = {dt * rate:.3g} exceeds {STABILITY}; "
            f"use dt <= {STABILITY / rate:.6g}"
        )


def safe_dt(*rate_models: RateModel) -> float:
    rate = max(r.max_total_rate for r in rate_models)
    return STABILITY / rate if rate > 0 else 1.0


def _rk4(p, rates: RateModel, n, h):
    f = rates.rhs
    for _ in range(n):
        k1 = f(p)
        k2 = f(p + (h / 2) * k1)
        k3 = f(p + (h / 2) * k2)
        k4 = f(p + h * k3)
        p = p + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return p


def evolve(dist: MagnetizationDistribution, rates: RateModel, t_span: float, dt: float):
    """Integrate the master equation over a duration ``t_span`` with classic RK4.

    The step actually used is ``t_span / ceil(t_span/dt)`` (never above ``dt``).
    Raises :class:`StepSizeError` if ``dt * max_total_rate > 0.1``.
    """
    _check_step(rates, dt)
    n, h = _steps(t_span, dt)
    p = _rk4(dist.p, rates, n, h)
    return MagnetizationDistribution(dist.N, p, dist.sector_weight, dist.sector)


def evolve_snapshots(dist, rates: RateModel, times: Sequence[float], dt: float, t0: float = 0.0):
    """Evolve through increasing absolute ``times``; returns [(t, dist), ...]."""
    out = []
    t = t0
    for target in times:
        if target < t:
            raise ValidationError("snapshot times must be increasing")
        dist = evolve(dist, rates, target - t, dt)
        t = target
        out.append((t, dist))
    return out


class Classification(NamedTuple):
    status: str
    pointer: Optional[int] = None

    def __str__(self):
        return f"{self.status}({self.pointer:+d})" if self.pointer else self.status


def default_threshold(params) -> float:
    """Half the zero-field ferromagnetic magnetization."""
    return thermo.ferromagnetic_magnetization(params.T, 0.0, 1, params.J) / 2


def classify(dist: MagnetizationDistribution, m_threshold: float) -> Classification:
    """Registered(+-1) if >= 99 % of the mass lies beyond +-m_threshold,
    Relaxed if >= 99 % lies within |m| < m_threshold, otherwise Undecided."""
    if not 0 < m_threshold < 1:
        raise ValidationError("m_threshold must lie in (0, 1)")
    m = dist.m
    if dist.mass_where(m > m_threshold) >= REGISTERED_MASS:
        return Classification(REGISTERED, 1)
    if dist.mass_where(m < -m_threshold) >= REGISTERED_MASS:
        return Classification(REGISTERED, -1)
    if dist.mass_where(np.abs(m) < m_threshold) >= REGISTERED_MASS:
        return Classification(RELAXED)
    return Classification(UNDECIDED)


def dissipated_free_energy(params, m_final) -> float:
    """N [F(0) - F(m_final)] at zero coupling: free energy handed to the bath."""
    f0 = thermo.free_energy_per_spin(0.0, params.T, 0.0, 1, params.J)
    f1 = thermo.free_energy_per_spin(np.clip(m_final, -1, 1), params.T, 0.0, 1, params.J)
    return params.N * (f0 - f1)


def default_schedule(params) -> tuple[float, float]:
    """(t_couple, t_relax) = (20/gamma, 10/gamma)."""
    return 20.0 / params.gamma, 10.0 / params.gamma


@dataclass
class SectorOutcome:
    weight: float
    distribution: MagnetizationDistribution
    classification: Classification
    dissipated_free_energy: float
    snapshots: list = field(default_factory=list)


@dataclass
class MeasurementResult:
    """Final state p_up |up><up| x R_up + p_down |down><down| x R_down.

    ``off_diagonal`` is the magnitude left in the cat terms at decoupling.
    """

    sectors: dict
    off_diagonal: float
    t_couple: float
    t_relax: float

    @property
    def p_up(self):
        return self.sectors[1].weight

    @property
    def p_down(self):
        return self.sectors[-1].weight


def run_measurement(
    rho0: SpinDensityMatrix,
    params,
    t_couple: float,
    t_relax: float,
    dt: Optional[float] = None,
    m_threshold: Optional[float] = None,
    theta: Optional[float] = None,
    snapshots_per_phase: int = 0,
) -> MeasurementResult:
    """Couple for ``t_couple`` at g, decouple (g -> 0), relax for ``t_relax``.

    Both sectors are always evolved; a sector's Born weight r_ss(0) only
    labels its distribution. With ``snapshots_per_phase = k`` each sector
    also keeps its distribution at t = 0 and k evenly spaced times per phase.
    """
    if validate(rho0):
        raise ValidationError(f"invalid initial state: {validate(rho0)}")
    if not (t_couple > 0 and t_relax > 0):
        raise ValidationError("t_couple and t_relax must be > 0")
    if m_threshold is None:
        m_threshold = default_threshold(params)
    start = initial_distribution(params)
    k = max(int(snapshots_per_phase), 1)
    couple_times = [t_couple * (i + 1) / k for i in range(k)]
    couple_times[-1] = t_couple
    relax_times = [t_couple + t_relax * (i + 1) / k for i in range(k)]
    relax_times[-1] = t_couple + t_relax

    sectors = {}
    for s, weight in ((1, rho0.r_uu), (-1, rho0.r_dd)):
        coupled = build_generator(params, s, params.g)
        free = build_generator(params, s, 0.0)
        step = safe_dt(coupled, free) if dt is None else dt
        d = MagnetizationDistribution(params.N, start.p, weight, s)
        snaps = [(0.0, d)]
        snaps += evolve_snapshots(d, coupled, couple_times, step)
        snaps += evolve_snapshots(snaps[-1][1], free, relax_times, step, t0=t_couple)
        d = snaps[-1][1]
        sectors[s] = SectorOutcome(
            weight, d, classify(d, m_threshold),
            float(dissipated_free_energy(params, d.mean())),
            snaps if snapshots_per_phase else [],
        )
    off = abs(complex(rho0.r_ud))
    if params.g > 0:
        dp = DephasingParams.from_model(params, theta)
        off *= abs(float(damped_truncation_factor(dp, t_couple)))
    return MeasurementResult(sectors, off, t_couple, t_relax)


# ---------------------------------------------------------------- kinetic MC


@dataclass
class MeasurementRecord:
    run: int
    sector: int
    pointer_sign: Optional[int]
    status: str
    dissipated_free_energy: float
    t_f: float
    seed: int
    final_m: float = 0.0

    def __post_init__(self):
        if (self.status == REGISTERED) != (self.pointer_sign is not None):
            raise ValidationError("pointer sign must be set iff the run registered")

    @property
    def outcome(self) -> str:
        return str(Classification(self.status, self.pointer_sign))


OUTCOMES = ("Registered(+1)", "Registered(-1)", "Relaxed", "Undecided")


@dataclass
class SamplingResult:
    counts: dict
    records: list
    checkpoint_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    checkpoint_m: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def fraction(self, outcome: str) -> float:
        return self.counts[outcome] / max(len(self.records), 1)


def run_streams(seed: int, runs: Sequence[int]) -> list:
    """Independent generator per run, keyed on (seed, run index)."""
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r]))) for r in runs]


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("CWMEAS_THREADS", "1")))
    except ValueError:
        return 1


BLOCK = 256


def _kmc_chunk(streams, sector_override, r_uu, tables, init_cdf, ends, checkpoints):
    """Exact-jump trajectories in the frame x = s m (the sector always pushes up).

    Every run consumes its own stream in a fixed pattern: one uniform for the
    sector, one for the initial position, then two per event. Lockstep
    vectorization over runs therefore never changes a run's path.
    """
    n = len(streams)
    up_tab, tot_tab = tables
    N = up_tab.shape[1] - 1

    head = np.array([rng.random(2) for rng in streams]) if n else np.empty((0, 2))
    if sector_override is None:
        sector = np.where(head[:, 0] < r_uu, 1, -1)
    else:
        sector = np.asarray(sector_override, dtype=int)
    idx = np.minimum(np.searchsorted(init_cdf, head[:, 1], side="right"), N)

    t = np.zeros(n)
    phase = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    cps = np.asarray(checkpoints, dtype=float)
    rec = np.zeros((n, len(cps)), dtype=int)
    ptr = np.zeros(n, dtype=int)
    buf = np.empty((n, 2 * BLOCK))
    cursor = 2 * BLOCK

    while active.any():
        a = np.flatnonzero(active)
        if cursor == 2 * BLOCK:
            for j in a:
                buf[j] = streams[j].random(2 * BLOCK)
            cursor = 0
        u1 = 1.0 - buf[a, cursor]
        u2 = buf[a, cursor + 1]
        cursor += 2

        ph = phase[a]
        i = idx[a]
        tot = tot_tab[ph, i]
        with np.errstate(divide="ignore"):
            tn = t[a] - np.log(u1) / tot
        over = tn >= ends[ph]
        t_hold = np.where(over, ends[ph], tn)

        if len(cps):
            while True:
                pa = ptr[a]
                due = pa < len(cps)
                due[due] = cps[pa[due]] < t_hold[due]
                if not due.any():
                    break
                rows = a[due]
                rec[rows, ptr[rows]] = idx[rows]
                ptr[rows] += 1

        jump = ~over
        step = np.where(u2 * tot < up_tab[ph, i], 1, -1)
        idx[a[jump]] += step[jump]
        t[a] = t_hold
        phase[a[over]] += 1
        done = a[over & (ph + 1 >= len(ends))]
        active[done] = False

    if len(cps):
        left = ptr < len(cps)
        for r in np.flatnonzero(left):
            rec[r, ptr[r]:] = idx[r]
    x = lattice(N)
    return sector, sector * x[idx], sector[:, None] * x[rec]


def simulate_runs(
    params,
    r_uu: float,
    seed: int,
    run_ids: Sequence[int],
    t_couple: float,
    t_relax: float,
    sectors=None,
    checkpoints: Sequence[float] = (),
    threads: Optional[int] = None,
):
    """Kinetic Monte Carlo of independent runs.

    Returns (sectors, final m, m at each checkpoint). ``sectors`` overrides the
    Born draw (the uniform is still consumed, so paths are unchanged).
    """
    coupled = build_generator(params, 1, params.g)
    free = build_generator(params, 1, 0.0)
    up_tab = np.stack([coupled.up_rates, free.up_rates])
    tot_tab = np.stack([coupled.total, free.total])
    init_cdf = np.cumsum(initial_distribution(params).p)
    init_cdf /= init_cdf[-1]
    ends = np.array([t_couple, t_couple + t_relax])
    run_ids = list(run_ids)

    threads = thread_count() if threads is None else threads
    n_chunks = max(1, min(threads, len(run_ids)))
    bounds = np.linspace(0, len(run_ids), n_chunks + 1).astype(int)

    def work(c):
        lo, hi = bounds[c], bounds[c + 1]
        ov = None if sectors is None else np.asarray(sectors)[lo:hi]
        return _kmc_chunk(
            run_streams(seed, run_ids[lo:hi]), ov, r_uu, (up_tab, tot_tab), init_cdf, ends, checkpoints
        )

    if n_chunks == 1:
        parts = [work(0)]
    else:
        with ThreadPoolExecutor(n_chunks) as ex:
            parts = list(ex.map(work, range(n_chunks)))
    return tuple(np.concatenate(x) for x in zip(*parts))


def classify_point(m: float, m_threshold: float) -> Classification:
    if m > m_threshold:
        return Classification(REGISTERED, 1)
    if m < -m_threshold:
        return Classification(REGISTERED, -1)
    if abs(m) < m_threshold:
        return Classification(RELAXED)
    return Classification(UNDECIDED)


def sample_trajectories(
    rho0: SpinDensityMatrix,
    params,
    n_runs: int,
    seed: int,
    t_couple: Optional[float] = None,
    t_relax: Optional[float] = None,
    m_threshold: Optional[float] = None,
    checkpoints: Sequence[float] = (),
    threads: Optional[int] = None,
) -> SamplingResult:
    """Simulate ``n_runs`` single measurements and classify each endpoint.

    The sector of each run is drawn with probability r_ss(0). Results depend
    only on ``seed``; thread count affects speed, never output.
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    if validate(rho0):
        raise ValidationError(f"invalid initial state: {validate(rho0)}")
    tc, tr = default_schedule(params)
    t_couple = tc if t_couple is None else t_couple
    t_relax = tr if t_relax is None else t_relax
    if m_threshold is None:
        m_threshold = default_threshold(params)

    sectors, final_m, cp_m = simulate_runs(
        params, float(rho0.r_uu), seed, range(n_runs), t_couple, t_relax,
        checkpoints=checkpoints, threads=threads,
    )
    counts = dict.fromkeys(OUTCOMES, 0)
    records = []
    diss = dissipated_free_energy(params, final_m)
    for r in range(n_runs):
        c = classify_point(final_m[r], m_threshold)
        rec = MeasurementRecord(
            r, int(sectors[r]), c.pointer, c.status, float(diss[r]),
            t_couple + t_relax, seed, float(final_m[r]),
        )
        counts[rec.outcome] += 1
        records.append(rec)
    return SamplingResult(counts, records, np.asarray(checkpoints, dtype=float), cp_m)
