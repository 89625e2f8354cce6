"""Maxwell-Boltzmann averages over the atomic velocity.

With beams 1 and 3 along x and beam 2 along y, the dark-manifold dynamics only
see ``u = v_x - v_y``, a Gaussian variable of standard deviation
``sqrt(2) v_bar``.  Quadrature therefore runs over ``u`` alone; the
Monte-Carlo mode samples full 3-D velocities and serves as a check of that
reduction.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import units
from .dynamics import D2, Schedule, evolve_adiabatic
from .holonomy import PhaseLoop, holonomy
from .qmath import is_hermitian
from .tripod import dark_real_vectors, gauge_potentials

# velocity direction whose projection v_x - v_y equals the coordinate u
_U_DIRECTION = np.array([0.5, -0.5, 0.0])


class InvalidStateError(ValueError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThermalSpec:
    """Velocity distribution and averaging scheme.

    ``v_bar`` in um/us.  ``order`` is the Gauss-Hermite order; with
    ``monte_carlo=True`` ``samples`` 3-D velocities are drawn with ``seed``.
    """

    v_bar: float
    order: int = 64
    monte_carlo: bool = False
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.v_bar < 0:
            raise ValueError("v_bar must be non-negative")
        if not self.monte_carlo and self.order < 8:
            raise ValueError("quadrature order must be at least 8")

    @classmethod
    def from_temperature(cls, temperature_uK, **kw):
        return cls(units.thermal_velocity(temperature_uK), **kw)

    @property
    def temperature_uK(self):
        return units.temperature_from_velocity(self.v_bar)

    def velocities(self):
        """``(velocities (N, 3), weights (N,))`` summing to one."""
        if self.monte_carlo:
            rng = np.random.default_rng(self.seed)
            v = rng.normal(0.0, self.v_bar, size=(self.samples, 3))
            return v, np.full(self.samples, 1.0 / self.samples)
        x, w = np.polynomial.hermite_e.hermegauss(self.order)
        u = math.sqrt(2.0) * self.v_bar * x
        return np.outer(u, _U_DIRECTION), w / math.sqrt(2.0 * math.pi)


@dataclass
class EnsembleResult:
    times: np.ndarray
    populations: np.ndarray  # (n_times, 3)
    rho: np.ndarray  # (n_times, 2, 2) dark-manifold density matrix
    purity: np.ndarray  # (n_times,)
    convergence: float = 0.0  # max change under quadrature order doubling
    converged: bool = True

    @property
    def final_populations(self):
        return self.populations[-1]


def decoherence_time(cfg, v_bar=None):
    """Gaussian decay constant ``tau = 3 / (2 k v_bar)`` (inf for a frozen gas)."""
    v = cfg.thermal_velocity if v_bar is None else v_bar
    return math.inf if v == 0 else 3.0 / (2.0 * cfg.k * v)


def envelope(cfg, t, v_bar=None):
    v = cfg.thermal_velocity if v_bar is None else v_bar
    return np.exp(-(4.0 / 9.0) * (cfg.k * v * np.asarray(t, dtype=float)) ** 2)


def mean_populations(cfg, t, v_bar=None):
    """Thermally averaged bare populations after preparing ``D2`` at ``t = 0``."""
    osc = 0.25 * np.cos((4.0 / 3.0) * cfg.recoil * np.asarray(t, dtype=float)) * envelope(cfg, t, v_bar)
    p1 = 5.0 / 12.0 - osc
    p3 = 5.0 / 12.0 + osc
    return p1, np.full_like(p1, 1.0 / 6.0), p3


def mean_populations_limit():
    return 5.0 / 12.0, 1.0 / 6.0, 5.0 / 12.0


def purity(rho, tol=1e-8):
    """``Tr(rho^2)`` for a 2x2 density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InvalidStateError("expected a 2x2 density matrix")
    if not is_hermitian(rho, tol):
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidStateError("density matrix trace differs from one")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise InvalidStateError("density matrix is not positive semidefinite")
    return float(np.real(np.trace(rho @ rho)))


def _scenario_schedule(cfg, scenario, times):
    if isinstance(scenario, PhaseLoop):
        t = np.array([0.0, scenario.duration]) if times is None else times
        return Schedule.from_loop(cfg.rabi, scenario, t)
    if scenario == "static":
        if times is None:
            raise ValueError("static scenario needs output times")
        t = np.asarray(times, dtype=float)
        grid = t if t[0] == 0.0 else np.concatenate([[0.0], t])
        return Schedule.hold(cfg.rabi, float(grid[-1]), grid)
    raise ValueError(f"unknown scenario {scenario!r}")


def _average(cfg, spec, schedule, d0, method, potentials):
    v, w = spec.velocities()
    traj = evolve_adiabatic(cfg, schedule, v, d0, method=method, potentials=potentials)
    s = traj.states  # (n_times, N, 2)
    rho = np.einsum("n,tnj,tnk->tjk", w, s, np.conj(s))
    y = dark_real_vectors(cfg.rabi)
    pops = np.real(np.einsum("ji,tjk,ki->ti", y, rho, y))
    return pops, rho


def ensemble_average(cfg, spec, scenario, d0=D2, times=None, method="exact",
                     check_convergence=True):
    """Velocity-averaged dark dynamics for a static hold or a phase loop.

    ``scenario`` is ``"static"`` (requires ``times``) or a :class:`PhaseLoop`
    (final state by default, or sampled at ``times``).  Quadrature convergence
    is checked by doubling the order; ``converged`` is False when any output
    moves by more than 1e-6.
    """
    schedule = _scenario_schedule(cfg, scenario, times)
    potentials = gauge_potentials(cfg)
    pops, rho = _average(cfg, spec, schedule, d0, method, potentials)
    delta = 0.0
    if check_convergence and not spec.monte_carlo and spec.v_bar > 0:
        finer = ThermalSpec(spec.v_bar, order=2 * spec.order)
        p2, r2 = _average(cfg, finer, schedule, d0, method, potentials)
        delta = float(max(np.max(np.abs(p2 - pops)), np.max(np.abs(r2 - rho))))
    t = schedule.times
    if scenario == "static" and np.asarray(times, dtype=float)[0] != 0.0:
        t, pops, rho = t[1:], pops[1:], rho[1:]
    pur = np.real(np.einsum("tjk,tkj->t", rho, rho))
    return EnsembleResult(t, pops, rho, pur, delta, delta <= 1e-6)


def ensemble_mc_error(cfg, spec, scenario, d0=D2, times=None, method="exact"):
    """Monte-Carlo means and standard errors of the bare populations."""
    if not spec.monte_carlo:
        raise ValueError("needs a Monte-Carlo spec")
    schedule = _scenario_schedule(cfg, scenario, times)
    v, _ = spec.velocities()
    traj = evolve_adiabatic(cfg, schedule, v, d0, method=method)
    p = traj.populations  # (n_times, N, 3)
    return p.mean(axis=1), p.std(axis=1, ddof=1) / math.sqrt(p.shape[1])


def thermal_vs_pinned_distance(cfg, spec, loop, d0=D2, reference="pinned"):
    """``sqrt(sum_i (P_i - P0_i)^2)`` between thermal and reference final populations.

    ``reference="pinned"`` compares with the pure holonomy (infinite mass);
    ``"recoil"`` with an atom at rest that still feels the scalar potential,
    which isolates the velocity spread from the deterministic recoil shift.
    """
    if not loop.closed:
        raise ValueError("needs a closed loop")
    thermal = ensemble_average(cfg, spec, loop, d0, check_convergence=False).final_populations
    if reference == "pinned":
        d = holonomy(loop) @ np.asarray(d0, dtype=complex)
        ref = np.abs(d @ dark_real_vectors(cfg.rabi)) ** 2
    elif reference == "recoil":
        sched = Schedule.from_loop(cfg.rabi, loop)
        ref = evolve_adiabatic(cfg, sched, d0=d0, method="exact").final_populations
    else:
        raise ValueError(f"unknown reference {reference!r}")
    return float(np.sqrt(np.sum((thermal - ref) ** 2)))


@dataclass(frozen=True)
class PopulationRecord:
    t: float
    p1: float
    p2: float
    p3: float


@dataclass(frozen=True)
class ThermometryFit:
    v_bar: float
    temperature_uK: float
    residual: float  # rms of the fit residual
    amplitude: float
    offset: float
    tau: float


def _difference_model(cfg, t, v_bar):
    return np.cos((4.0 / 3.0) * cfg.recoil * t) * envelope(cfg, t, v_bar)


def fit_temperature(records, cfg, nuisance=False, v_max=None, mass_kg=units.SR87_MASS_KG):
    """Fit ``P3 - P1 = a cos(4/3 omega_R t) exp(-4/9 (k v t)^2) + b`` for ``v``.

    Without ``nuisance`` the amplitude is fixed to 1/2 and the offset to 0;
    with it both are solved linearly at every trial ``v``.  ``v`` is scanned on
    a grid over ``[0, v_max]`` and refined by bounded Brent minimisation.
    """
    t = np.array([r.t for r in records], dtype=float)
    y = np.array([r.p3 - r.p1 for r in records], dtype=float)
    if len(t) < 3:
        raise FitError("need at least three records")
    if np.ptp(y) < 1e-9:
        raise FitError("population difference is flat; temperature not identifiable")
    if v_max is None:
        # fastest decay still resolved: tau equal to the first sample spacing
        dt = np.min(np.diff(np.unique(t))) if len(np.unique(t)) > 1 else t.max()
        v_max = 3.0 / (2.0 * cfg.k * dt)

    def solve(v):
        m = _difference_model(cfg, t, v)
        if nuisance:
            basis = np.stack([m, np.ones_like(m)], axis=1)
            coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
            a, b = coef
        else:
            a, b = 0.5, 0.0
        r = y - (a * m + b)
        return float(r @ r), a, b

    grid = np.linspace(0.0, v_max, 401)
    sse = np.array([solve(v)[0] for v in grid])
    i = int(np.argmin(sse))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda v: solve(v)[0], bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12 * v_max})
        v_best = float(res.x) if res.fun <= sse[i] else float(grid[i])
    else:
        v_best = float(grid[i])
    err, a, b = solve(v_best)
    return ThermometryFit(
        v_bar=v_best,
        temperature_uK=units.temperature_from_velocity(v_best, mass_kg),
        residual=math.sqrt(err / len(t)),
        amplitude=float(a),
        offset=float(b),
        tau=decoherence_time(cfg, v_best),
    )


def synthetic_records(cfg, times, v_bar=None, noise=0.0, shots=1, rng=None):
    """Closed-form thermal populations with optional Gaussian shot noise.

    Each of ``shots`` repetitions adds independent noise of standard deviation
    ``noise`` to every population; the returned records are shot averages.
    """
    p1, p2, p3 = mean_populations(cfg, times, v_bar)
    clean = np.stack([p1, p2, p3], axis=1)
    if noise > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        draws = rng.normal(0.0, noise, size=(shots,) + clean.shape)
        clean = clean + draws.mean(axis=0)
    return [PopulationRecord(float(t), *map(float, row)) for t, row in zip(times, clean)]
