"""Path-ordered holonomies of the dark manifold over loops in (phi1, phi2).

Ordering convention (used everywhere in the package): a state evolves as
``d <- U_segment d`` and segments multiply from the left in traversal order,
so the loop ``a -> b -> c`` has holonomy ``U = U_c U_b U_a``.
"""

from dataclasses import dataclass

import numpy as np

from .qmath import (
    aligned_frobenius_distance,
    exp_i_hermitian,
    frobenius_distance,
    is_unitary,
)
from .tripod import connection_omega_t

CLOSURE_TOL = 1e-12


class InvalidLoopError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """Linear ramp of the relative phases from ``start`` to ``end`` in ``duration`` us."""

    start: tuple
    end: tuple
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidLoopError("segment duration must be positive")
        object.__setattr__(self, "start", tuple(float(x) for x in self.start))
        object.__setattr__(self, "end", tuple(float(x) for x in self.end))

    @property
    def rates(self):
        return ((self.end[0] - self.start[0]) / self.duration,
                (self.end[1] - self.start[1]) / self.duration)

    def phases_at(self, tau):
        """Phases a time ``tau`` (0 <= tau <= duration) into the segment."""
        f = tau / self.duration
        return (self.start[0] + f * (self.end[0] - self.start[0]),
                self.start[1] + f * (self.end[1] - self.start[1]))

    def reversed(self):
        return Segment(self.end, self.start, self.duration)


@dataclass(frozen=True)
class PhaseLoop:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InvalidLoopError("a path needs at least one segment")
        for prev, nxt in zip(segs, segs[1:]):
            if np.max(np.abs(np.subtract(prev.end, nxt.start))) > CLOSURE_TOL:
                raise InvalidLoopError("segment endpoints do not chain")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def canonical(cls, phi0, segment_duration=4.0):
        """Triangle ``a: (0,0)->(phi0,0)``, ``b: ->(phi0,phi0)``, ``c: ->(0,0)``."""
        return cls.from_vertices([(0.0, 0.0), (phi0, 0.0), (phi0, phi0), (0.0, 0.0)],
                                 segment_duration, close=False)

    @classmethod
    def from_vertices(cls, vertices, durations=4.0, close=True):
        """Piecewise-linear path through ``vertices``; closed back to the first by default."""
        pts = [tuple(map(float, v)) for v in vertices]
        if close and pts[0] != pts[-1]:
            pts.append(pts[0])
        n = len(pts) - 1
        if n < 1:
            raise InvalidLoopError("need at least two vertices")
        durs = np.broadcast_to(np.asarray(durations, dtype=float), (n,))
        return cls(tuple(Segment(pts[i], pts[i + 1], durs[i]) for i in range(n)))

    @property
    def closed(self):
        return bool(np.max(np.abs(np.subtract(self.segments[-1].end,
                                              self.segments[0].start))) <= CLOSURE_TOL)

    @property
    def vertices(self):
        return [s.start for s in self.segments] + [self.segments[-1].end]

    @property
    def duration(self):
        return float(sum(s.duration for s in self.segments))

    def __len__(self):
        return len(self.segments)

    def reversed(self):
        return PhaseLoop(tuple(s.reversed() for s in reversed(self.segments)))

    def phases_at(self, t):
        """Phases at time ``t`` from the start of the path (clamped to its ends)."""
        for seg in self.segments:
            if t <= seg.duration:
                return seg.phases_at(max(t, 0.0))
            t -= seg.duration
        return self.segments[-1].end


def segment_unitary(seg):
    """Exact transport ``exp(i omega_t Delta t)`` along one constant-rate segment."""
    return exp_i_hermitian(connection_omega_t(*seg.rates), seg.duration)


def transport(segments, steps_per_segment=1):
    """Ordered product over an open or closed path (later steps on the left)."""
    if steps_per_segment < 1:
        raise ValueError("steps_per_segment must be >= 1")
    u = np.eye(2, dtype=complex)
    for seg in segments:
        step = exp_i_hermitian(connection_omega_t(*seg.rates),
                               seg.duration / steps_per_segment)
        for _ in range(steps_per_segment):
            u = step @ u
    return u


def holonomy(loop, steps_per_segment=1):
    """Wilczek-Zee holonomy of a closed piecewise-linear loop.

    Each segment is exact, so the result does not depend on
    ``steps_per_segment``; the sub-stepping only exists as a cross-check.
    """
    if not loop.closed:
        raise InvalidLoopError("holonomy needs a closed loop")
    return transport(loop.segments, steps_per_segment)


def ramp_holonomy(phases, duration, steps):
    """Ordered product for an arbitrary ramp ``phases(t) -> (phi1, phi2)``.

    Each of the ``steps`` slices uses the chord rate across the slice, which
    makes piecewise-linear inputs exact and converges for smooth ramps.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = duration / steps
    u = np.eye(2, dtype=complex)
    prev = np.asarray(phases(0.0), dtype=float)
    for n in range(1, steps + 1):
        cur = np.asarray(phases(n * dt), dtype=float)
        r = (cur - prev) / dt
        u = exp_i_hermitian(connection_omega_t(r[0], r[1]), dt) @ u
        prev = cur
    return u


def cyclic_shift(loop, start_vertex):
    """Same closed loop traversed from vertex ``start_vertex``."""
    if not loop.closed:
        raise InvalidLoopError("cyclic shift needs a closed loop")
    n = len(loop.segments)
    if not 0 <= start_vertex <= n:
        raise IndexError(f"start vertex {start_vertex} out of range for {n} segments")
    k = start_vertex % n
    return PhaseLoop(loop.segments[k:] + loop.segments[:k])


@dataclass(frozen=True)
class WitnessReport:
    U: np.ndarray
    U_shifted: np.ndarray
    connector: np.ndarray
    D: float
    D_aligned: float
    conjugacy_error: float
    trace_gap: float

    @property
    def unitarily_related(self):
        return self.conjugacy_error <= 1e-10 and self.trace_gap <= 1e-10


def nonabelian_witness(loop, start_vertex=None):
    """Compare the holonomy from the first vertex with the one from ``start_vertex``.

    The default start is the last vertex, which turns ``a -> b -> c`` into
    ``c -> a -> b``.  ``connector`` is the open-path transport ``V`` from the
    original start to the new one, so ``U' = V U V^dag``.
    """
    n = len(loop.segments)
    if n < 2:
        raise InvalidLoopError("witness needs at least two segments")
    k = n - 1 if start_vertex is None else start_vertex
    u = holonomy(loop)
    shifted = cyclic_shift(loop, k)
    u2 = holonomy(shifted)
    v = transport(loop.segments[: k % n])
    conj_err = float(np.max(np.abs(v @ u @ v.conj().T - u2)))
    gap = abs(abs(np.trace(u)) - abs(np.trace(u2)))
    if not (is_unitary(u) and is_unitary(u2)):
        raise ArithmeticError("holonomy lost unitarity")
    return WitnessReport(
        U=u,
        U_shifted=u2,
        connector=v,
        D=frobenius_distance(u, u2),
        D_aligned=aligned_frobenius_distance(u, u2),
        conjugacy_error=conj_err,
        trace_gap=float(gap),
    )
