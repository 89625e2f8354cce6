import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tripod_gauge.holonomy import (
    InvalidLoopError,
    PhaseLoop,
    Segment,
    cyclic_shift,
    holonomy,
    nonabelian_witness,
    ramp_holonomy,
    segment_unitary,
    transport,
)
from tripod_gauge.qmath import IDENTITY2, unitarity_error
from tripod_gauge.tripod import connection_omega_t

from .test_qmath import series_expm

SQ3 = math.sqrt(3.0)
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
vertex = st.tuples(angles, angles)


def test_zero_length_segment_is_identity():
    seg = Segment((0.3, 0.4), (0.3, 0.4), 4.0)
    assert np.max(np.abs(segment_unitary(seg) - IDENTITY2)) < 1e-15


def test_canonical_segments_against_series():
    loop = PhaseLoop.canonical(math.pi)
    a, b, c = loop.segments
    gen_a = 0.5 * np.array([[1, 1 / SQ3], [1 / SQ3, 1 / 3]])
    assert np.max(np.abs(segment_unitary(a) - series_expm(1j * math.pi * gen_a))) < 1e-10
    u_c = np.diag(np.exp(-1j * math.pi * np.array([1, 1 / 3])))
    assert np.max(np.abs(segment_unitary(c) - u_c)) < 1e-14
    u = holonomy(loop)
    assert np.max(np.abs(u - segment_unitary(c) @ segment_unitary(b) @ segment_unitary(a))) < 1e-15


def test_canonical_loop_structure():
    loop = PhaseLoop.canonical(0.8, 4.0)
    assert len(loop) == 3 and loop.closed
    assert loop.duration == pytest.approx(12.0)
    assert loop.vertices == [(0, 0), (0.8, 0), (0.8, 0.8), (0, 0)]


def test_invalid_loops():
    with pytest.raises(InvalidLoopError):
        Segment((0, 0), (1, 0), 0.0)
    with pytest.raises(InvalidLoopError):
        PhaseLoop((Segment((0, 0), (1, 0), 1.0), Segment((2, 0), (1, 1), 1.0)))
    open_path = PhaseLoop.from_vertices([(0, 0), (1, 0)], close=False)
    with pytest.raises(InvalidLoopError):
        holonomy(open_path)
    with pytest.raises(InvalidLoopError):
        cyclic_shift(open_path, 0)
    with pytest.raises(IndexError):
        cyclic_shift(PhaseLoop.canonical(1.0), 4)
    with pytest.raises(ValueError):
        transport(PhaseLoop.canonical(1.0).segments, 0)


def test_out_and_back_is_identity():
    loop = PhaseLoop.from_vertices([(0, 0), (2.0, 0.7)])
    assert len(loop) == 2
    assert np.max(np.abs(holonomy(loop) - IDENTITY2)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(vertex, min_size=2, max_size=6), st.floats(0.5, 8.0))
def test_unitarity_and_reversal(vertices, dt):
    loop = PhaseLoop.from_vertices(vertices, dt)
    u = holonomy(loop)
    assert unitarity_error(u) < 1e-10
    assert np.max(np.abs(u @ holonomy(loop.reversed()) - IDENTITY2)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(vertex, min_size=3, max_size=6), st.integers(0, 6))
def test_cyclic_shift_trace_invariance(vertices, k):
    loop = PhaseLoop.from_vertices(vertices)
    k = k % (len(loop) + 1)
    w = nonabelian_witness(loop, k)
    assert w.trace_gap < 1e-10
    assert w.conjugacy_error < 1e-10
    assert w.unitarily_related


def test_cyclic_shift_orderings():
    loop = PhaseLoop.canonical(math.pi)
    assert cyclic_shift(loop, 0) == loop
    assert cyclic_shift(loop, len(loop)) == loop
    a, b, c = loop.segments
    assert cyclic_shift(loop, 2).segments == (c, a, b)
    u_a, u_b, u_c = (segment_unitary(s) for s in (a, b, c))
    assert np.max(np.abs(holonomy(cyclic_shift(loop, 2)) - u_b @ u_a @ u_c)) < 1e-15


def test_pinned_witness_value():
    """Closed form: |Tr U^dag U'| = 47/64 at phi0 = pi, so D = 9/8."""
    w = nonabelian_witness(PhaseLoop.canonical(math.pi))
    t = abs(np.trace(w.U.conj().T @ w.U_shifted))
    assert t == pytest.approx(47 / 64, abs=1e-12)
    assert w.D == pytest.approx(math.sqrt(2 - 47 / 64), abs=1e-12)
    assert w.D_aligned == pytest.approx(math.sqrt(4 - 2 * 47 / 64), abs=1e-12)
    # same value for the other non-trivial start vertex
    assert nonabelian_witness(PhaseLoop.canonical(math.pi), 1).D == pytest.approx(w.D, abs=1e-12)


def test_diagonal_loop_is_abelian():
    loop = PhaseLoop.from_vertices([(0, 0), (1.0, 1.0), (2.5, 2.5)])
    u = [segment_unitary(s) for s in loop.segments]
    assert np.max(np.abs(u[0] @ u[1] - u[1] @ u[0])) < 1e-15
    w = nonabelian_witness(loop)
    assert w.D < 1e-7 and w.D_aligned < 1e-7


def test_small_loop_limit():
    d = [nonabelian_witness(PhaseLoop.canonical(p * math.pi)).D for p in (0.04, 0.02, 0.01)]
    assert d[2] < 0.01
    assert d[0] > d[1] > d[2]


def test_substeps_do_not_change_exact_result():
    loop = PhaseLoop.canonical(1.1 * math.pi)
    u = holonomy(loop)
    assert np.max(np.abs(holonomy(loop, 17) - u)) < 1e-12


def test_ramp_product_matches_piecewise_linear():
    loop = PhaseLoop.canonical(0.9 * math.pi, 3.0)
    u = ramp_holonomy(loop.phases_at, loop.duration, 30)
    assert np.max(np.abs(u - holonomy(loop))) < 1e-12


def test_ramp_product_converges_for_curved_path():
    """Circular loop: error of the N-slice product is at most C/N."""
    def phases(t):
        a = 2 * math.pi * t / 10.0
        return (1.5 * (1 - math.cos(a)), 1.5 * math.sin(a))

    ref = ramp_holonomy(phases, 10.0, 4096)
    errs = [np.max(np.abs(ramp_holonomy(phases, 10.0, n) - ref)) for n in (16, 32, 64, 128)]
    for n, e in zip((16, 32, 64, 128), errs):
        assert e * n < errs[0] * 16 * 1.01
    assert errs[-1] < errs[0] / 4


def test_transport_of_rate_matrix_generator():
    seg = Segment((0.0, 0.0), (1.0, -0.5), 2.0)
    expected = series_expm(1j * connection_omega_t(*seg.rates) * 2.0)
    assert np.max(np.abs(transport([seg]) - expected)) < 1e-10
