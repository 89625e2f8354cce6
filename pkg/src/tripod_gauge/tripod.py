"""Tripod atom: bare Hamiltonian, dark-state frames and synthetic gauge fields.

Basis ordering is ``(|1>, |2>, |3>, |e>)`` throughout.  Beam ``i`` couples
ground state ``|i>`` to ``|e>`` with Rabi frequency ``rabi[i]`` and laser phase
``Phi_i(r) = k_i . r + theta_i``.  The controlled relative phases are
``phi_1 = theta_1 - theta_3`` and ``phi_2 = theta_2 - theta_3``.

Dark states are built in the gauge of the equal-amplitude textbook basis::

    D1 = (e^{-i Phi_13}|1> - e^{-i Phi_23}|2>) / sqrt(2)
    D2 = (e^{-i Phi_13}|1> + e^{-i Phi_23}|2> - 2|3>) / sqrt(6)

generalised to unequal amplitudes by writing ``D_j = sum_i y_ji e^{-i Phi_i3}|i>``
with real ``y_j`` orthogonal to ``(Omega_1, Omega_2, Omega_3)``.  ``y_1`` has no
``|3>`` weight and ``y_2 = Omega x y_1``; both are smooth in the amplitudes so the
frame is continuous along any phase or amplitude ramp.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import units
from .qmath import commutator

SQRT3 = np.sqrt(3.0)

# rank-1 projector shared by A, A^2/2M and W for the standard beam geometry
PROJECTOR_M = np.array([[3 / 4, -SQRT3 / 4], [-SQRT3 / 4, 1 / 4]], dtype=complex)
PROJECTOR_BLOCH = np.array([-SQRT3 / 2, 0.0, 1 / 2])

_DEFAULT_DIRECTIONS = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0))


class DegenerateConfigurationError(ValueError):
    """All couplings vanish, so the dark manifold is not defined."""


@dataclass(frozen=True)
class TripodConfig:
    """Laser geometry, amplitudes and atomic constants.

    Units: ``k`` in rad/um, ``rabi`` and ``recoil`` in rad/us, phases in rad,
    ``thermal_velocity`` in um/us.
    """

    k: float = units.wavenumber()
    rabi: tuple = (1.0, 1.0, 1.0)
    offset_phases: tuple = (0.0, 0.0, 0.0)
    recoil: float = units.recoil_frequency(units.wavenumber())
    thermal_velocity: float = 0.0
    directions: tuple = field(default=_DEFAULT_DIRECTIONS)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if any(r < 0 for r in self.rabi):
            raise ValueError("Rabi frequencies must be non-negative")
        if self.recoil <= 0:
            raise ValueError("recoil frequency must be positive")
        if self.thermal_velocity < 0:
            raise ValueError("thermal velocity must be non-negative")
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (3, 3) or not np.allclose(np.linalg.norm(d, axis=1), 1.0):
            raise ValueError("directions must be three unit vectors")

    @classmethod
    def strontium(cls, rabi_khz=250.0, temperature_uK=0.5, rabi_scale=(1.0, 1.0, 1.0),
                  wavelength_um=units.INTERCOMBINATION_WAVELENGTH_UM,
                  mass_kg=units.SR87_MASS_KG):
        """Sr-87 on the 689 nm line with equal Rabi frequencies ``2*pi*rabi_khz``."""
        k = units.wavenumber(wavelength_um)
        omega = units.khz_to_rad_per_us(rabi_khz)
        return cls(
            k=k,
            rabi=tuple(float(omega * s) for s in rabi_scale),
            recoil=units.recoil_frequency(k, mass_kg),
            thermal_velocity=units.thermal_velocity(temperature_uK, mass_kg),
        )

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def wavevectors(self):
        return self.k * np.asarray(self.directions, dtype=float)

    @property
    def equal_rabi(self):
        return bool(np.allclose(self.rabi, self.rabi[0], rtol=1e-12, atol=0.0))

    def thetas(self, phi1=None, phi2=None):
        """Beam phases at the origin, optionally overriding the relative phases."""
        th = np.asarray(self.offset_phases, dtype=float)
        if phi1 is None and phi2 is None:
            return th
        p1 = th[0] - th[2] if phi1 is None else phi1
        p2 = th[1] - th[2] if phi2 is None else phi2
        return np.array([th[2] + p1, th[2] + p2, th[2]])

    def laser_phases(self, r=(0.0, 0.0, 0.0), phi1=None, phi2=None):
        return self.wavevectors @ np.asarray(r, dtype=float) + self.thetas(phi1, phi2)


@dataclass(frozen=True)
class DarkFrame:
    """Two orthonormal dark states in the bare basis, shape ``(2, 4)``."""

    vectors: np.ndarray
    r: tuple
    phases: tuple

    @property
    def d1(self):
        return self.vectors[0]

    @property
    def d2(self):
        return self.vectors[1]

    def to_bare(self, d):
        """Bare 4-vector of the dark superposition ``d[0] D1 + d[1] D2``."""
        return np.asarray(d, dtype=complex) @ self.vectors

    def project(self, psi):
        """Dark amplitudes ``<D_j|psi>``."""
        return np.conj(self.vectors) @ np.asarray(psi, dtype=complex)


def bare_hamiltonian(cfg, r=(0.0, 0.0, 0.0), t=0.0, rabi=None, phases=None):
    """Resonant RWA tripod Hamiltonian (hbar = 1).

    ``H = 1/2 sum_i Omega_i e^{i Phi_i(r)} |e><i| + h.c.``.  ``rabi`` and
    ``phases = (phi1, phi2)`` override the configuration (used by time-dependent
    schedules); ``t`` is accepted for signature symmetry with schedules.
    """
    omega = np.asarray(cfg.rabi if rabi is None else rabi, dtype=float)
    p = (None, None) if phases is None else phases
    Phi = cfg.laser_phases(r, *p)
    h = np.zeros((4, 4), dtype=complex)
    h[3, :3] = 0.5 * omega * np.exp(1j * Phi)
    h[:3, 3] = np.conj(h[3, :3])
    return h


def dark_real_vectors(rabi):
    """Real amplitude vectors ``y_1, y_2`` spanning the orthogonal complement of ``rabi``."""
    o = np.asarray(rabi, dtype=float)
    if not np.any(o > 0):
        raise DegenerateConfigurationError("all Rabi frequencies vanish")
    y1 = np.array([o[1], -o[0], 0.0])
    n1 = np.linalg.norm(y1)
    if n1 == 0.0:
        # only beam 3 on: every |1>,|2> combination is dark
        y1 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
        y2 = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        return np.stack([y1, y2])
    y1 /= n1
    y2 = np.cross(o, y1)
    return np.stack([y1, y2 / np.linalg.norm(y2)])


def dark_basis(cfg, r=(0.0, 0.0, 0.0), phi1=None, phi2=None, rabi=None):
    """Orthonormal dark frame at position ``r`` and relative phases ``(phi1, phi2)``."""
    y = dark_real_vectors(cfg.rabi if rabi is None else rabi)
    Phi = cfg.laser_phases(r, phi1, phi2)
    gauge = np.exp(-1j * (Phi - Phi[2]))
    vecs = np.zeros((2, 4), dtype=complex)
    vecs[:, :3] = y * gauge
    return DarkFrame(vectors=vecs, r=tuple(np.asarray(r, dtype=float)),
                     phases=(float(Phi[0] - Phi[2]), float(Phi[1] - Phi[2])))


def coupling_row(cfg, r=(0.0, 0.0, 0.0), phi1=None, phi2=None, rabi=None):
    omega = np.asarray(cfg.rabi if rabi is None else rabi, dtype=float)
    return omega * np.exp(1j * cfg.laser_phases(r, phi1, phi2))


def connection_omega_t(rate1, rate2):
    """Phase-ramp connection ``omega_t`` for equal Rabi amplitudes (hbar = 1)."""
    s = rate1 + rate2
    d = (rate1 - rate2) / SQRT3
    return 0.5 * np.array([[s, d], [d, s / 3.0]], dtype=complex)


def phase_connection(cfg, rabi=None):
    """Generators ``(C1, C2)`` with ``omega_t = rate1*C1 + rate2*C2``.

    ``C_a[j, k] = i <D_j | d D_k / d phi_a> = y_ja y_ka``; valid for any amplitudes.
    """
    y = dark_real_vectors(cfg.rabi if rabi is None else rabi)
    c1 = np.outer(y[:, 0], y[:, 0]).astype(complex)
    c2 = np.outer(y[:, 1], y[:, 1]).astype(complex)
    return c1, c2


@dataclass(frozen=True)
class GaugePotentials:
    """Uniform gauge fields of the dark manifold.

    ``A`` has shape ``(3, 2, 2)`` (one matrix per Cartesian axis, rad/um);
    ``A_sq_over_2m``, ``W`` and ``scalar`` (their sum) are in rad/us.
    """

    A: np.ndarray
    A_sq_over_2m: np.ndarray
    W: np.ndarray
    M: np.ndarray
    method: str
    fd_residual: float = 0.0

    @property
    def scalar(self):
        return self.A_sq_over_2m + self.W

    def a_dot(self, v):
        return np.tensordot(np.asarray(v, dtype=float), self.A, axes=1)


def _analytic_derivative_products(cfg):
    # D_j = sum_i y_ji e^{-i (k_i - k_3).r} |i>, so grad only pulls down -i(k_i - k_3)
    y = dark_real_vectors(cfg.rabi)
    dk = cfg.wavevectors - cfg.wavevectors[2]
    A = np.einsum("id,ji,ki->djk", dk, y, y).astype(complex)
    G = np.einsum("i,ji,ki->jk", np.sum(dk**2, axis=1), y, y).astype(complex)
    return A, G


def _fd_derivative_products(cfg, h):
    r0 = np.zeros(3)
    frame0 = dark_basis(cfg, r0).vectors
    grads = []
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        plus = dark_basis(cfg, r0 + e).vectors
        minus = dark_basis(cfg, r0 - e).vectors
        grads.append((plus - minus) / (2.0 * h))
    grads = np.array(grads)  # (axis, j, component)
    A = 1j * np.einsum("jc,dkc->djk", np.conj(frame0), grads)
    G = np.einsum("djc,dkc->jk", np.conj(grads), grads)
    return A, G


def _assemble(cfg, A, G, method, residual=0.0):
    hbar2_over_2m = cfg.recoil / cfg.k**2  # hbar^2/(2M) in rad/us * um^2
    a_sq = np.einsum("djk,dkl->jl", A, A)
    return GaugePotentials(
        A=A,
        A_sq_over_2m=hbar2_over_2m * a_sq,
        W=hbar2_over_2m * (G - a_sq),
        M=PROJECTOR_M.copy(),
        method=method,
        fd_residual=residual,
    )


def gauge_potentials(cfg, method="auto", step=None):
    """Vector potential ``A``, ``A^2/2M``, scalar potential ``W`` and the projector ``M``.

    ``method``:

    ``"closed"``
        Equal amplitudes with beams 1 and 3 co-propagating:
        ``A = 2 (k2 - k1)/3 M`` and ``A^2/2M = 4|k2 - k1|^2/(9 k^2) omega_R M``.
        ``W`` is still evaluated from its definition with analytic gradients.
    ``"analytic"``
        Definitions evaluated with exact gradients of the dark frame.
    ``"fd"``
        Central finite differences of :func:`dark_basis` over ``r``; the step
        defaults to 1e-4 wavelengths and ``fd_residual`` reports the change
        under step halving.
    ``"auto"``
        ``"closed"`` when applicable, otherwise ``"fd"``.
    """
    k = cfg.wavevectors
    closed_ok = cfg.equal_rabi and np.allclose(k[0], k[2])
    if method == "auto":
        method = "closed" if closed_ok else "fd"
    if method == "closed":
        if not closed_ok:
            raise ValueError("closed form needs equal Rabi amplitudes and k1 == k3")
        _, G = _analytic_derivative_products(cfg)
        A = np.einsum("d,jk->djk", 2.0 * (k[1] - k[0]) / 3.0, PROJECTOR_M)
        out = _assemble(cfg, A, G, "closed")
        coeff = 4.0 * np.sum((k[1] - k[0]) ** 2) / (9.0 * cfg.k**2) * cfg.recoil
        return replace(out, A_sq_over_2m=coeff * PROJECTOR_M)
    if method == "analytic":
        A, G = _analytic_derivative_products(cfg)
        return _assemble(cfg, A, G, "analytic")
    if method == "fd":
        h = 1e-4 * (2.0 * np.pi / cfg.k) if step is None else step
        A, G = _fd_derivative_products(cfg, h)
        A2, G2 = _fd_derivative_products(cfg, h / 2.0)
        coarse = _assemble(cfg, A, G, "fd")
        fine = _assemble(cfg, A2, G2, "fd")
        residual = max(
            float(np.max(np.abs(coarse.A - fine.A))),
            float(np.max(np.abs(coarse.W - fine.W))),
        )
        return replace(fine, fd_residual=residual)
    raise ValueError(f"unknown method {method!r}")


def scalar_gap(potentials):
    """Splitting of the scalar term ``A^2/2M + W`` inside the dark manifold."""
    w = np.linalg.eigvalsh(0.5 * (potentials.scalar + potentials.scalar.conj().T))
    return float(w[-1] - w[0])


def generator_commutator_norm():
    """Frobenius norm of ``[omega_t(1, 0), omega_t(0, 1)]``."""
    return float(np.linalg.norm(commutator(connection_omega_t(1.0, 0.0),
                                           connection_omega_t(0.0, 1.0))))
