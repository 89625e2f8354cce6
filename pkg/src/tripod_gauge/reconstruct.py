"""Inverse problem: bare populations -> dark amplitudes -> SU(2) operator.

Populations fix ``|d_2|`` and ``cos(phi)`` with ``phi = arg d_2 - arg d_1``;
the sign of ``phi`` comes from a model prediction.  Two reconstructed
input/output pairs fix the rotation of the dark-manifold Bloch sphere, hence
the operator up to an overall sign, which is again lifted by the prediction.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.transform import Rotation

from .qmath import bloch_vector, su2_from_rotation_quaternion

POLE_TOL = 1e-9


class InconsistentPopulationsError(ValueError):
    """Populations cannot come from a normalised dark state."""


class IllConditionedError(ValueError):
    """Input states too close to collinear on the Bloch sphere."""


@dataclass(frozen=True)
class DarkReconstruction:
    d1_abs: float
    d2_abs: float
    phi: float  # in [0, pi] until resolved, then in (-pi, pi]
    provenance: str = "unresolved"  # unresolved | prediction-resolved | degenerate | pole
    phi_defined: bool = True
    clamped: bool = False

    @property
    def cos_phi(self):
        return math.cos(self.phi)

    def state(self, sign=1):
        """Dark 2-vector with real non-negative ``d_1``."""
        return np.array([self.d1_abs, self.d2_abs * np.exp(1j * sign * self.phi)])

    @property
    def populations(self):
        return self.d1_abs**2, self.d2_abs**2


def dark_from_populations(p1, p2, p3, eps=0.02):
    """Invert the dark-to-bare map for a pure dark state.

    Populations are first renormalised to unit sum (their sum must be within
    ``eps`` of one).  ``p3`` up to ``2/3 + eps`` and ``|cos phi|`` up to
    ``1 + eps`` are clamped with ``clamped=True``; larger violations raise
    :class:`InconsistentPopulationsError`.
    """
    p = np.array([p1, p2, p3], dtype=float)
    if np.any(p < -eps):
        raise InconsistentPopulationsError(f"negative population in {p}")
    total = p.sum()
    if abs(total - 1.0) > eps:
        raise InconsistentPopulationsError(f"populations sum to {total:.4f}")
    p = np.clip(p, 0.0, None) / p.sum()
    clamped = False
    if p[2] > 2.0 / 3.0:
        if p[2] > 2.0 / 3.0 + eps:
            raise InconsistentPopulationsError(f"P3 = {p[2]:.4f} exceeds 2/3")
        p[2] = 2.0 / 3.0
        clamped = True
    d2 = math.sqrt(1.5 * p[2])
    d1 = math.sqrt(max(0.0, 1.0 - d2 * d2))
    denom = math.sqrt(max(0.0, p[2] * (2.0 - 3.0 * p[2])))
    if d1 < POLE_TOL or d2 < POLE_TOL or denom < POLE_TOL:
        return DarkReconstruction(d1, d2, 0.0, "pole", phi_defined=False, clamped=clamped)
    c = (p[0] - p[1]) / denom
    if abs(c) > 1.0:
        if abs(c) > 1.0 + eps:
            raise InconsistentPopulationsError(f"|cos phi| = {abs(c):.4f} exceeds one")
        c = math.copysign(1.0, c)
        clamped = True
    return DarkReconstruction(d1, d2, math.acos(c), clamped=clamped)


def _ray_distance(a, b):
    """``min_chi ||e^{i chi} a - b||`` for normalised 2-vectors."""
    return math.sqrt(max(0.0, 2.0 - 2.0 * abs(np.vdot(a, b))))


def sign_resolve(rec, predicted, tie_tol=1e-6):
    """Pick the ``phi`` branch closer (up to global phase) to the prediction.

    Branches whose distances to the prediction differ by at most ``tie_tol``
    are left unresolved with provenance ``"degenerate"``, except for real
    states where both branches coincide.
    """
    if not rec.phi_defined:
        return rec
    predicted = np.asarray(predicted, dtype=complex)
    predicted = predicted / np.linalg.norm(predicted)
    plus = _ray_distance(predicted, rec.state(+1))
    minus = _ray_distance(predicted, rec.state(-1))
    if abs(plus - minus) <= tie_tol:
        # real states: both branches coincide
        if rec.phi < 1e-12 or abs(rec.phi - math.pi) < 1e-12:
            return replace(rec, provenance="prediction-resolved")
        return replace(rec, provenance="degenerate")
    phi = rec.phi if plus < minus else -rec.phi
    return replace(rec, phi=phi, provenance="prediction-resolved")


@dataclass(frozen=True)
class UnitaryFit:
    U: np.ndarray
    residual: float  # max Bloch-vector mismatch of the two pairs after the fit
    consistent: bool

    @property
    def alpha(self):
        return self.U[0, 0]

    @property
    def beta(self):
        return self.U[0, 1]


def unitary_from_two_states(pairs, predicted, collinear_tol=1e-6, residual_limit=0.05):
    """SU(2) operator mapping two known inputs onto their reconstructed outputs.

    ``pairs`` holds two ``(input dark 2-vector, DarkReconstruction)`` tuples.
    The Bloch rotation is the best orthogonal fit of the two vector pairs
    (exact for consistent data), converted to ``[[a, b], [-b*, a*]]``; the
    remaining overall sign is chosen closest to ``predicted``.
    """
    if len(pairs) != 2:
        raise ValueError("need exactly two input/output pairs")
    n_in = np.array([bloch_vector(np.asarray(d, dtype=complex)) for d, _ in pairs])
    n_in /= np.linalg.norm(n_in, axis=1)[:, None]
    if 1.0 - abs(float(n_in[0] @ n_in[1])) < collinear_tol:
        raise IllConditionedError("input Bloch vectors are collinear")
    n_out = np.array([bloch_vector(rec.state()) for _, rec in pairs])
    rot, _ = Rotation.align_vectors(n_out, n_in)
    u = su2_from_rotation_quaternion(rot.as_quat())
    predicted = np.asarray(predicted, dtype=complex)
    pred = predicted / np.sqrt(np.linalg.det(predicted))
    if np.linalg.norm(-u - pred) < np.linalg.norm(u - pred):
        u = -u
    residual = float(np.max(np.linalg.norm(rot.apply(n_in) - n_out, axis=1)))
    return UnitaryFit(u, residual, residual <= residual_limit)


def reconstruct_state(populations, predicted, eps=0.02):
    """Populations -> sign-resolved reconstruction in one call."""
    return sign_resolve(dark_from_populations(*populations, eps=eps), predicted)
