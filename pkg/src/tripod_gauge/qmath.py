"""Small complex linear algebra: Hermitian exponentials, unitarity checks and
phase-insensitive distances between 2x2 unitaries.

Matrices are plain ``numpy`` complex128 arrays.  All tolerances are absolute
on O(1) dimensionless entries.
"""

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


class InvalidInputError(ValueError):
    """A matrix failed a structural precondition (Hermitian, unitary, shape)."""


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def hermiticity_error(h):
    h = np.asarray(h)
    return float(np.max(np.abs(h - dagger(h)))) if h.size else 0.0


def is_hermitian(h, tol=HERMITIAN_TOL):
    return hermiticity_error(h) <= tol


def unitarity_error(u):
    u = np.asarray(u, dtype=complex)
    n = u.shape[-1]
    return float(np.max(np.abs(dagger(u) @ u - np.eye(n))))


def is_unitary(u, tol=UNITARY_TOL):
    return unitarity_error(u) <= tol


def commutator(a, b):
    return a @ b - b @ a


def pauli_coefficients(h):
    """Return (a0, a) with h = a0*1 + a.sigma for Hermitian 2x2 input (batched)."""
    h = np.asarray(h, dtype=complex)
    a0 = 0.5 * np.real(h[..., 0, 0] + h[..., 1, 1])
    ax = np.real(h[..., 0, 1])
    ay = -np.imag(h[..., 0, 1])
    az = 0.5 * np.real(h[..., 0, 0] - h[..., 1, 1])
    return a0, np.stack([ax, ay, az], axis=-1)


def _exp_i_hermitian_2x2(h, s):
    # exp(i s (a0 + a.sigma)) = e^{i s a0} (cos(s|a|) + i sin(s|a|) a_hat.sigma)
    a0, a = pauli_coefficients(h)
    norm = np.linalg.norm(a, axis=-1)
    theta = s * norm
    # sin(theta)/|a| written to stay finite as |a| -> 0
    sinc = s * np.sinc(theta / np.pi)
    c = np.cos(theta)
    phase = np.exp(1j * s * a0)
    out = np.empty(np.shape(h), dtype=complex)
    out[..., 0, 0] = c + 1j * sinc * a[..., 2]
    out[..., 1, 1] = c - 1j * sinc * a[..., 2]
    out[..., 0, 1] = 1j * sinc * (a[..., 0] - 1j * a[..., 1])
    out[..., 1, 0] = 1j * sinc * (a[..., 0] + 1j * a[..., 1])
    return out * phase[..., None, None]


def exp_i_hermitian(h, s=1.0, check=True):
    """Return ``exp(i*s*h)`` for Hermitian ``h``.

    2x2 inputs (also stacked as ``(..., 2, 2)``) use the closed-form Pauli
    decomposition; larger inputs go through ``numpy.linalg.eigh``.

    Raises
    ------
    InvalidInputError
        If ``h`` is not square or deviates from Hermitian by more than
        ``HERMITIAN_TOL``.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise InvalidInputError(f"expected square matrix, got shape {h.shape}")
    if check and not is_hermitian(h):
        raise InvalidInputError(
            f"matrix is not Hermitian (max |H - H^dag| = {hermiticity_error(h):.3e})"
        )
    if h.shape[-1] == 2:
        return _exp_i_hermitian_2x2(h, s)
    hs = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(hs)
    return (v * np.exp(1j * s * w)[..., None, :]) @ dagger(v)


def frobenius_distance(u, v):
    """``sqrt(2 - |Tr(U^dag V)|)`` for 2x2 unitaries (maximum sqrt(2))."""
    t = abs(np.trace(dagger(np.asarray(u)) @ np.asarray(v)))
    return float(np.sqrt(max(0.0, 2.0 - t)))


def aligned_frobenius_distance(u, v):
    """``min_chi ||e^{i chi} U - V||_F = sqrt(4 - 2|Tr(U^dag V)|)`` (maximum 2)."""
    t = abs(np.trace(dagger(np.asarray(u)) @ np.asarray(v)))
    return float(np.sqrt(max(0.0, 4.0 - 2.0 * t)))


def to_su2(u):
    """Strip the global phase so that det = 1 (sign choice: principal root)."""
    u = np.asarray(u, dtype=complex)
    return u / np.sqrt(np.linalg.det(u))


def bloch_vector(d):
    """Bloch vector of a normalised 2-vector, +z for the first basis state."""
    d = np.asarray(d, dtype=complex)
    c = np.conj(d[..., 0]) * d[..., 1]
    return np.stack(
        [2 * c.real, 2 * c.imag, np.abs(d[..., 0]) ** 2 - np.abs(d[..., 1]) ** 2], axis=-1
    )


def su2_from_rotation_quaternion(quat):
    """SU(2) element for a scipy-style (x, y, z, w) rotation quaternion."""
    x, y, z, w = quat
    return w * IDENTITY2 - 1j * (x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)
