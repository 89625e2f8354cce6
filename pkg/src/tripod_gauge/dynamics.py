"""Time evolution of the tripod atom.

Two integrators share one fixed-step RK4 core:

* :func:`evolve_full` propagates the bare 4-level state.  The atom moves on
  ``r(t) = v t`` so each beam carries the Doppler phase ``k_i . v t``; in
  addition each bare state carries the recoil kinetic energy of its momentum
  family (``omega_R |k_3 - k_i|^2 / k^2`` for ``|i>``, ``omega_R`` for ``|e>``),
  which is what makes the plane-wave model exact.
* :func:`evolve_adiabatic` propagates dark-manifold amplitudes under
  ``A^2/2M + W - A.v - omega_t``.

Both refine the step by halving until the populations at the output times
move by less than ``tol``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .holonomy import PhaseLoop
from .qmath import exp_i_hermitian
from .tripod import (
    bare_hamiltonian,
    dark_basis,
    dark_real_vectors,
    gauge_potentials,
    phase_connection,
)

SQRT3 = math.sqrt(3.0)

D1 = np.array([1.0, 0.0], dtype=complex)
D2 = np.array([0.0, 1.0], dtype=complex)
MIXED_IDEAL = np.array([0.5, SQRT3 / 2], dtype=complex)
# measured preparation of the mixed sequence
MIXED_PRESET = np.array([0.6, 0.8 * np.exp(1j * 0.15 * np.pi)], dtype=complex)

NORM_DRIFT_LIMIT = 1e-6


class StepSizeError(RuntimeError):
    """Step refinement failed to converge or the norm drifted."""


@dataclass(frozen=True)
class Piece:
    """Interval of a schedule with linear phases and a Rabi envelope."""

    t0: float
    t1: float
    rabi: object  # callable t -> (3,) array, or a constant 3-sequence
    phase0: tuple = (0.0, 0.0)
    rate: tuple = (0.0, 0.0)

    def rabi_at(self, t):
        if callable(self.rabi):
            return np.asarray(self.rabi(t), dtype=float)
        return np.asarray(self.rabi, dtype=float)

    def phases_at(self, t):
        return (self.phase0[0] + self.rate[0] * (t - self.t0),
                self.phase0[1] + self.rate[1] * (t - self.t0))


@dataclass(frozen=True)
class Schedule:
    """Control sequence: Rabi envelopes and relative phases on ``[0, duration]``.

    ``times`` is the output sampling grid.  Pieces meet at breakpoints where
    rates or envelopes may jump; the integrators never step across one.
    """

    pieces: tuple
    times: np.ndarray

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for p, q in zip(pieces, pieces[1:]):
            if abs(p.t1 - q.t0) > 1e-12:
                raise ValueError("schedule pieces must be contiguous")
            if np.max(np.abs(np.subtract(p.phases_at(p.t1), q.phase0))) > 1e-9:
                raise ValueError("phases must be continuous")
        times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if times[0] < pieces[0].t0 or times[-1] > pieces[-1].t1 + 1e-12:
            raise ValueError("time grid outside the schedule")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "times", times)

    @classmethod
    def hold(cls, rabi, duration, times=None, phases=(0.0, 0.0)):
        times = np.array([0.0, duration]) if times is None else times
        return cls((Piece(0.0, float(duration), tuple(rabi), tuple(phases)),), times)

    @classmethod
    def from_loop(cls, rabi, loop: PhaseLoop, times=None):
        pieces, t = [], 0.0
        for seg in loop.segments:
            pieces.append(Piece(t, t + seg.duration, tuple(rabi), seg.start, seg.rates))
            t += seg.duration
        times = np.array([0.0, t]) if times is None else times
        return cls(tuple(pieces), times)

    @property
    def duration(self):
        return self.pieces[-1].t1

    @property
    def breakpoints(self):
        return sorted({p.t0 for p in self.pieces} | {self.duration})

    def piece(self, t, ref=None):
        x = t if ref is None else ref
        for p in self.pieces:
            if x < p.t1:
                return p
        return self.pieces[-1]

    def rabi(self, t, ref=None):
        return self.piece(t, ref).rabi_at(t)

    def phases(self, t, ref=None):
        return self.piece(t, ref).phases_at(t)

    def rates(self, t, ref=None):
        return self.piece(t, ref).rate


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, ..., dim), bare 4-vectors or dark 2-vectors
    populations: np.ndarray  # (n_times, ..., 3) bare ground populations
    excited: np.ndarray  # (n_times, ...) excited population (zeros for adiabatic)
    leakage: float  # max excited population over every integration step
    dt: float
    norm_drift: float

    @property
    def final_populations(self):
        return self.populations[-1]


def _nodes(schedule):
    pts = set(schedule.breakpoints) | set(float(t) for t in schedule.times)
    return np.array(sorted(pts))


def _apply(h, psi):
    return np.einsum("...ij,...j->...i", h, psi)


def rk4_propagate(generator, psi0, schedule, dt, monitor=None):
    """Fixed-step RK4 for ``i dpsi/dt = H(t) psi`` honouring schedule breakpoints.

    ``generator(t, ref)`` returns ``H`` (batched as ``(..., n, n)``); ``ref`` is a
    time strictly inside the current piece so jumps are resolved correctly.
    Returns the states at ``schedule.times`` and the running maximum of
    ``monitor(psi)`` over all steps.
    """
    psi = np.array(psi0, dtype=complex)
    nodes = _nodes(schedule)
    out_idx = {float(t): i for i, t in enumerate(schedule.times)}
    out = np.empty((len(schedule.times),) + psi.shape, dtype=complex)
    peak = float(np.max(monitor(psi))) if monitor else 0.0
    if float(nodes[0]) in out_idx:
        out[out_idx[float(nodes[0])]] = psi
    for a, b in zip(nodes[:-1], nodes[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        h = (b - a) / n
        ref = 0.5 * (a + b)
        for s in range(n):
            t = a + s * h
            k1 = -1j * _apply(generator(t, ref), psi)
            hm = generator(t + 0.5 * h, ref)
            k2 = -1j * _apply(hm, psi + 0.5 * h * k1)
            k3 = -1j * _apply(hm, psi + 0.5 * h * k2)
            k4 = -1j * _apply(generator(t + h, ref), psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if monitor:
                peak = max(peak, float(np.max(monitor(psi))))
        if float(b) in out_idx:
            out[out_idx[float(b)]] = psi
    return out, peak


def _converged_rk4(generator, psi0, schedule, hmax, tol, max_halvings, monitor=None):
    span = max(b - a for a, b in zip(schedule.breakpoints[:-1], schedule.breakpoints[1:]))
    dt = min(0.2 / max(hmax, 1e-12), span)
    states, peak = rk4_propagate(generator, psi0, schedule, dt, monitor)
    for _ in range(max_halvings):
        dt /= 2.0
        finer, peak = rk4_propagate(generator, psi0, schedule, dt, monitor)
        change = float(np.max(np.abs(np.abs(finer) ** 2 - np.abs(states) ** 2)))
        states = finer
        if change < tol:
            return states, peak, dt
    raise StepSizeError(f"populations still change by {change:.2e} at dt = {dt:.3e} us")


def _norm_drift(states, psi0):
    n0 = np.sum(np.abs(psi0) ** 2, axis=-1)
    return float(np.max(np.abs(np.sum(np.abs(states) ** 2, axis=-1) - n0)))


def recoil_shifts(cfg):
    """Kinetic energies of the momentum family, ordered ``(|1>, |2>, |3>, |e>)``."""
    kv = cfg.wavevectors
    ground = cfg.recoil * np.sum((kv[2] - kv) ** 2, axis=1) / cfg.k**2
    return np.concatenate([ground, [cfg.recoil]])


def full_hamiltonian(cfg, schedule, v, t, ref=None):
    h = bare_hamiltonian(cfg, r=np.asarray(v, dtype=float) * t,
                         rabi=schedule.rabi(t, ref), phases=schedule.phases(t, ref))
    return h + np.diag(recoil_shifts(cfg))


def evolve_full(cfg, schedule, v=(0.0, 0.0, 0.0), psi0=None, tol=1e-8, max_halvings=14):
    """Integrate the bare 4-level Schroedinger equation (no adiabatic approximation).

    ``psi0`` defaults to ``D2`` of the frame at the schedule's initial phases.
    Raises :class:`StepSizeError` if refinement stalls or the norm drifts by
    more than 1e-6.
    """
    v = np.asarray(v, dtype=float)
    if psi0 is None:
        p = schedule.phases(0.0)
        psi0 = dark_basis(cfg, phi1=p[0], phi2=p[1], rabi=schedule.rabi(0.0)).d2
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalised")

    def gen(t, ref):
        return full_hamiltonian(cfg, schedule, v, t, ref)

    hmax = max(np.linalg.norm(gen(t, None), 2) for t in schedule.breakpoints)
    hmax = max(hmax, max(np.linalg.norm(p.rabi_at(p.t1)) for p in schedule.pieces))
    states, peak, dt = _converged_rk4(gen, psi0, schedule, hmax, tol, max_halvings,
                                      monitor=lambda s: np.abs(s[..., 3]) ** 2)
    drift = _norm_drift(states, psi0)
    if drift > NORM_DRIFT_LIMIT:
        raise StepSizeError(f"norm drift {drift:.2e}")
    pops = np.abs(states[..., :3]) ** 2
    return Trajectory(schedule.times, states, pops, np.abs(states[..., 3]) ** 2,
                      peak, dt, drift)


def velocity_frequency(cfg, v):
    """``omega_v = 2/3 [k (v_x - v_y) + 2 omega_R]`` for the standard geometry."""
    v = np.asarray(v, dtype=float)
    return (2.0 / 3.0) * (cfg.k * (v[..., 0] - v[..., 1]) + 2.0 * cfg.recoil)


def scalar_generator(cfg, v, potentials=None):
    """Velocity-dependent part ``A^2/2M + W - A.v`` (batched over ``v[..., 3]``)."""
    pot = gauge_potentials(cfg) if potentials is None else potentials
    v = np.asarray(v, dtype=float)
    return pot.scalar - np.einsum("...d,djk->...jk", v, pot.A)


def evolve_adiabatic(cfg, schedule, v=(0.0, 0.0, 0.0), d0=D2, method="rk4", tol=1e-8,
                     max_halvings=14, potentials=None):
    """Integrate ``i dd/dt = [A^2/2M + W - A.v - omega_t(t)] d`` in the dark manifold.

    Amplitudes are the fixed ``cfg.rabi``; the schedule only supplies phase
    ramps.  ``v`` may be a batch ``(N, 3)``; states then have shape
    ``(n_times, N, 2)``.  ``method="exact"`` exponentiates the piecewise
    constant generator instead of stepping.
    """
    base = scalar_generator(cfg, v, potentials)
    c1, c2 = phase_connection(cfg)
    d0 = np.asarray(d0, dtype=complex)
    if abs(np.linalg.norm(d0) - 1.0) > 1e-10:
        raise ValueError("initial dark state must be normalised")
    psi0 = np.broadcast_to(d0, base.shape[:-2] + (2,)).copy()

    def gen(t, ref):
        r1, r2 = schedule.rates(t, ref)
        return base - (r1 * c1 + r2 * c2)

    if method == "exact":
        states = _exact_piecewise(gen, psi0, schedule)
        dt = 0.0
    elif method == "rk4":
        hmax = max(float(np.max(np.linalg.norm(gen(p.t0, 0.5 * (p.t0 + p.t1)), 2, axis=(-2, -1))))
                   for p in schedule.pieces)
        states, _, dt = _converged_rk4(gen, psi0, schedule, hmax, tol, max_halvings)
    else:
        raise ValueError(f"unknown method {method!r}")
    drift = _norm_drift(states, psi0)
    if drift > NORM_DRIFT_LIMIT:
        raise StepSizeError(f"norm drift {drift:.2e}")
    y = dark_real_vectors(cfg.rabi)
    # bare amplitudes up to per-component phases: sum_j d_j y_ji
    pops = np.abs(np.einsum("...j,ji->...i", states, y)) ** 2
    return Trajectory(schedule.times, states, pops, np.zeros(pops.shape[:-1]), 0.0, dt, drift)


def _exact_piecewise(gen, psi0, schedule):
    nodes = _nodes(schedule)
    out_idx = {float(t): i for i, t in enumerate(schedule.times)}
    out = np.empty((len(schedule.times),) + psi0.shape, dtype=complex)
    psi = psi0
    if float(nodes[0]) in out_idx:
        out[out_idx[float(nodes[0])]] = psi
    for a, b in zip(nodes[:-1], nodes[1:]):
        u = exp_i_hermitian(gen(a, 0.5 * (a + b)), -(b - a), check=False)
        psi = _apply(u, psi)
        if float(b) in out_idx:
            out[out_idx[float(b)]] = psi
    return out


def ballistic_populations(cfg, v, t, p0=1.0):
    """Velocity-resolved bare populations after preparing ``D2`` at ``t = 0``."""
    c = np.cos(velocity_frequency(cfg, v) * np.asarray(t, dtype=float))
    p1 = 5.0 * p0 / 12.0 * (1.0 - 0.6 * c)
    p2 = np.broadcast_to(p0 / 6.0, np.shape(p1)) * 1.0
    p3 = 5.0 * p0 / 12.0 * (1.0 + 0.6 * c)
    return p1, p2, p3


def bare_populations(d, frame):
    """``P_i = |sum_j d_j <i|D_j>|^2`` for ``i = 1, 2, 3``."""
    amp = frame.to_bare(d)
    return tuple(float(x) for x in np.abs(amp[:3]) ** 2)


@dataclass
class IgnitionResult:
    style: str
    dark: np.ndarray  # normalised dark amplitudes, global phase fixed
    fidelity: float  # |<target|psi>|^2 in the full Hilbert space
    dark_population: float
    leakage: float
    failed: bool

    @property
    def report(self):
        return "preparation-failure" if self.failed else "ok"


def _ramp(kind):
    if kind == "linear":
        return lambda x: min(max(x, 0.0), 1.0)
    if kind == "sine2":
        return lambda x: math.sin(0.5 * math.pi * min(max(x, 0.0), 1.0)) ** 2
    raise ValueError(f"unknown ramp {kind!r}")


def ignite(cfg, style="D2", t0=8.0, ramp="linear", tol=1e-8):
    """Turn the beams on starting from bare ``|3>``.

    ``"D2"``: beams 1 and 2 on abruptly, beam 3 ramped over ``t0``; target
    ``D2``.  ``"mixed"``: beam 1 (on the empty state ``|1>``) on abruptly,
    beam 3 ramped over ``t0``, then beam 2 switched on abruptly; target
    ``(D1 + sqrt(3) D2)/2``.  Leakage above 5% flags a failed preparation.
    """
    f = _ramp(ramp)
    o = np.asarray(cfg.rabi, dtype=float)
    if style == "D2":
        env = (lambda t: (o[0], o[1], o[2] * f(t / t0)))
        target = D2
    elif style == "mixed":
        env = (lambda t: (o[0], 0.0, o[2] * f(t / t0)))
        target = MIXED_IDEAL
    else:
        raise ValueError("style must be 'D2' or 'mixed'")
    sched = Schedule((Piece(0.0, t0, env),), np.array([0.0, t0]))
    psi0 = np.array([0, 0, 1, 0], dtype=complex)
    traj = evolve_full(cfg, sched, psi0=psi0, tol=tol)
    psi = traj.states[-1]
    frame = dark_basis(cfg)
    proj = frame.project(psi)
    pop = float(np.sum(np.abs(proj) ** 2))
    dark = proj / math.sqrt(pop)
    k = int(np.argmax(np.abs(dark)))
    dark = dark * np.exp(-1j * np.angle(dark[k]))
    fid = float(abs(np.vdot(frame.to_bare(target), psi)) ** 2)
    return IgnitionResult(style, dark, fid, pop, traj.leakage, traj.leakage > 0.05)
