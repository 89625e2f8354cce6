"""Computations behind each CLI scenario, free of any file handling.

Every function returns plain numpy arrays or small dataclasses so that the
command line front end only formats and writes.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import thermal
from .dynamics import D2, MIXED_IDEAL, Schedule, evolve_adiabatic, evolve_full
from .holonomy import PhaseLoop, cyclic_shift, holonomy, nonabelian_witness
from .qmath import aligned_frobenius_distance, frobenius_distance
from .reconstruct import reconstruct_state, unitary_from_two_states
from .tripod import dark_real_vectors, gauge_potentials, scalar_gap

SQRT3 = math.sqrt(3.0)

# inputs whose outputs fix the operator; far apart on the Bloch sphere
PROBE_STATES = (D2, MIXED_IDEAL)


def fig2_table(cfg, times, spec):
    """Closed-form thermal populations with the ensemble integrator alongside."""
    t = np.asarray(times, dtype=float)
    p1, p2, p3 = thermal.mean_populations(cfg, t)
    env = thermal.envelope(cfg, t)
    ens = thermal.ensemble_average(cfg, spec, "static", D2, times=t)
    cols = {
        "t_us": t,
        "P1": p1,
        "P2": p2,
        "P3": p3,
        "P3_minus_P1": p3 - p1,
        "envelope": env,
        "P1_ens": ens.populations[:, 0],
        "P2_ens": ens.populations[:, 1],
        "P3_ens": ens.populations[:, 2],
        "max_abs_dev": np.max(np.abs(ens.populations - np.stack([p1, p2, p3], 1)), axis=1),
    }
    return cols, ens


def _dark_summary(rho):
    return (float(np.real(rho[0, 0])), float(np.real(rho[1, 1])),
            float(np.angle(rho[1, 0])))


def fig3_table(cfg, phi0_grid, spec, segment_us=4.0, d0=D2):
    """Pinned and thermal loop outputs as a function of the loop size."""
    y = dark_real_vectors(cfg.rabi)
    rows = []
    for phi0 in phi0_grid:
        loop = PhaseLoop.canonical(phi0, segment_us)
        d = holonomy(loop) @ d0
        pin = np.abs(d @ y) ** 2
        rho_pin = np.outer(d, d.conj())
        ens = thermal.ensemble_average(cfg, spec, loop, d0, check_convergence=False)
        rho = ens.rho[-1]
        pd1, pd2, phi = _dark_summary(rho)
        qd1, qd2, qphi = _dark_summary(rho_pin)
        rows.append([phi0 / math.pi, *pin, *ens.final_populations, pd1, pd2, phi,
                     float(ens.purity[-1]), qd1, qd2, qphi])
    names = ["phi0_over_pi", "P1_pin", "P2_pin", "P3_pin", "P1_th", "P2_th", "P3_th",
             "popD1", "popD2", "phi_azim", "purity", "popD1_pin", "popD2_pin",
             "phi_azim_pin"]
    arr = np.array(rows, dtype=float)
    return {n: arr[:, i] for i, n in enumerate(names)}


@dataclass(frozen=True)
class OperatorPair:
    label: str
    U: np.ndarray
    U_shifted: np.ndarray
    residual: float = 0.0

    @property
    def D(self):
        return frobenius_distance(self.U, self.U_shifted)

    @property
    def D_aligned(self):
        return aligned_frobenius_distance(self.U, self.U_shifted)

    @property
    def conjugacy_error(self):
        """Difference of ``|Tr|``, zero when the two are unitarily related."""
        return abs(abs(np.trace(self.U)) - abs(np.trace(self.U_shifted)))


def _reconstructed_operator(final_pops, predicted):
    """Two probe outputs -> operator, sign choices lifted by ``predicted``."""
    pairs = []
    for d_in, pops in zip(PROBE_STATES, final_pops):
        rec = reconstruct_state(pops, predicted @ d_in)
        pairs.append((d_in, rec))
    return unitary_from_two_states(pairs, predicted)


def pinned_populations(cfg, loop, d0):
    y = dark_real_vectors(cfg.rabi)
    return np.abs((holonomy(loop) @ d0) @ y) ** 2


def thermal_operator(cfg, spec, loop):
    """Effective operator of the thermal gas, seen through population tomography."""
    pops = [thermal.ensemble_average(cfg, spec, loop, d, check_convergence=False)
            .final_populations for d in PROBE_STATES]
    return _reconstructed_operator(pops, holonomy(loop))


def pinned_operator_via_populations(cfg, loop):
    pops = [pinned_populations(cfg, loop, d) for d in PROBE_STATES]
    return _reconstructed_operator(pops, holonomy(loop))


def fig4_operators(cfg, spec, phi0=math.pi, segment_us=4.0):
    """Sanity, pinned, pinned-through-tomography and thermal operator pairs.

    The shifted loop starts at the last vertex, i.e. runs ``c -> a -> b``.
    """
    loop = PhaseLoop.canonical(phi0, segment_us)
    shifted = cyclic_shift(loop, len(loop) - 1)
    w = nonabelian_witness(loop)
    pin_rec = pinned_operator_via_populations(cfg, loop)
    pin_rec_s = pinned_operator_via_populations(cfg, shifted)
    th = thermal_operator(cfg, spec, loop)
    th_s = thermal_operator(cfg, spec, shifted)
    return [
        OperatorPair("sanity", w.U, w.U),
        OperatorPair("pinned", w.U, w.U_shifted),
        OperatorPair("pinned_tomography", pin_rec.U, pin_rec_s.U,
                     max(pin_rec.residual, pin_rec_s.residual)),
        OperatorPair("thermal", th.U, th_s.U, max(th.residual, th_s.residual)),
    ]


def adiabaticity_point(cfg, ratio, phi0=1.2 * math.pi, samples=41):
    """Full vs adiabatic evolution over the canonical loop at ``v = 0``.

    The phase ramp rate ``gamma = phi0 / segment`` is set by
    ``ratio = sqrt(3) Omega / gamma`` with ``Omega`` the first Rabi frequency.
    Returns ``(segment_us, discrepancy, leakage, holonomy_gap)`` where the
    discrepancy is the largest bare-population difference along the loop and
    ``holonomy_gap`` compares the adiabatic end state with the pinned holonomy.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    gamma = SQRT3 * cfg.rabi[0] / ratio
    seg = phi0 / gamma
    loop = PhaseLoop.canonical(phi0, seg)
    times = np.linspace(0.0, loop.duration, samples)
    sched = Schedule.from_loop(cfg.rabi, loop, times)
    full = evolve_full(cfg, sched)
    adia = evolve_adiabatic(cfg, sched, method="exact")
    disc = float(np.max(np.abs(full.populations - adia.populations)))
    pinned = pinned_populations(cfg, loop, D2)
    gap = float(np.max(np.abs(adia.final_populations - pinned)))
    return seg, disc, full.leakage, gap


def loop_report(vertices, durations, steps=1):
    """Holonomy of an arbitrary closed loop and its cyclic-shift witness."""
    loop = PhaseLoop.from_vertices(vertices, durations)
    u = holonomy(loop, steps)
    w = nonabelian_witness(loop) if len(loop) >= 2 else None
    return loop, u, w


def gauge_summary(cfg):
    """Scalar gap of ``A^2/2M + W`` against the expected ``4/3 omega_R``."""
    pot = gauge_potentials(cfg)
    gap = scalar_gap(pot)
    expected = 4.0 / 3.0 * cfg.recoil
    w_eig = np.linalg.eigvalsh(pot.W)
    return {
        "gap": gap,
        "expected": expected,
        "relative_error": abs(gap - expected) / expected,
        "W_trace_sign": float(np.sign(np.real(np.trace(pot.W)))),
        "W_eigenvalues": w_eig,
    }
