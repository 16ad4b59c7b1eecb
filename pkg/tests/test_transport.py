import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from oracles import random_unitary, wilson_phase
from wannier_homotopy.errors import RankDeficient
from wannier_homotopy.grid import KGrid
from wannier_homotopy.matcore import unitarity_error
from wannier_homotopy.models import berry_loop, berry_phase_exact, random_tight_binding
from wannier_homotopy.transport import (ArrayProvider, ConstantProvider, closure_obstruction,
                                        transport_axis, transport_batch, transport_line,
                                        transport_step)


def random_provider(dim, n_bands, n_occ, seed, size=8):
    return ArrayProvider.from_model(random_tight_binding(dim, n_bands, n_occ, seed=seed),
                                    KGrid((size,) * dim))


@given(st.integers(2, 5), st.integers(0, 200))
def test_transport_steps_stay_orthonormal(n_bands, seed):
    n_occ = n_bands // 2
    p = random_provider(1, n_bands, n_occ, seed)
    u = random_unitary(n_occ, seed)
    seq = transport_line(p, u, [(i,) for i in range(8)], closed=True)
    assert len(seq) == 9
    for step in seq:
        assert unitarity_error(step) < 1e-12


def test_transport_step_identity_on_constant_provider():
    p = ConstantProvider(KGrid((8,)), 3)
    u = random_unitary(3, 0)
    assert np.allclose(transport_step(p, u, (2,), (3,)), u)


def test_transport_step_rejects_non_adjacent():
    p = ConstantProvider(KGrid((8, 8)), 1)
    with pytest.raises(ValueError):
        transport_step(p, np.eye(1), (0, 0), (1, 1))


def test_transport_step_wraps_across_boundary():
    p = random_provider(1, 4, 2, seed=3)
    u = random_unitary(2, 5)
    across = transport_step(p, u, (7,), (0,))
    # M(k_to, k_from) = <psi(0)|psi(7)>, then the polar factor
    m = p.occ[0].conj().T @ p.occ[7]
    expected, _ = scipy.linalg.polar(m @ u)
    assert np.allclose(across, expected, atol=1e-12)


def test_batch_matches_sequential_steps():
    p = random_provider(2, 4, 2, seed=9)
    u0 = random_unitary(2, 4)
    line = [(i, 3) for i in range(8)]
    seq = transport_line(p, u0, line, closed=True)
    batch = transport_axis(p, np.broadcast_to(u0, (8, 2, 2)), axis=0)
    assert np.allclose(np.array(seq), batch[3], atol=1e-12)


def test_provider_overlap_agrees_with_axis_overlaps():
    p = random_provider(3, 3, 1, seed=2)
    for axis in range(3):
        m = p.axis_overlaps(axis)
        off = tuple(1 if a == axis else 0 for a in range(3))
        assert np.allclose(m[1, 2, 7], p.overlap((1, 2, 7), off))
        assert np.allclose(p.axis_overlaps(axis, -1)[1, 2, 7], p.overlap((1, 2, 7), tuple(-o for o in off)))


@pytest.mark.parametrize("theta", [0.4, np.pi / 3, 2.5])
def test_obstruction_phase_is_berry_phase(theta):
    n = 64
    p = ArrayProvider.from_model(berry_loop(theta), KGrid((n,)))
    seq = transport_axis(p, np.eye(1, dtype=complex), axis=0)
    v = closure_obstruction(seq)
    phase = np.angle(v[0, 0])
    # each step conjugates the link phase, so V_obs = exp(i gamma), gamma = -arg prod(links)
    assert np.angle(np.exp(1j * (phase - berry_phase_exact(theta, n)))) == pytest.approx(0, abs=1e-10)
    assert np.angle(np.exp(1j * (phase - wilson_phase(berry_loop(theta), n)))) == pytest.approx(0, abs=1e-10)


def test_obstruction_spectrum_is_gauge_invariant():
    p = random_provider(1, 5, 3, seed=12, size=16)
    gauge = np.array([random_unitary(3, s) for s in range(16)])
    q = p.regauged(gauge)
    eye = np.eye(3, dtype=complex)
    v = closure_obstruction(transport_axis(p, eye, axis=0))
    w = closure_obstruction(transport_axis(q, eye, axis=0))
    assert np.allclose(w, gauge[0].conj().T @ v @ gauge[0], atol=1e-10)
    assert np.allclose(np.sort(np.angle(np.linalg.eigvals(v))),
                       np.sort(np.angle(np.linalg.eigvals(w))), atol=1e-10)


def test_closure_obstruction_of_list_and_array_agree():
    p = random_provider(1, 4, 2, seed=1)
    seq = transport_line(p, np.eye(2), [(i,) for i in range(8)], closed=True)
    assert np.allclose(closure_obstruction(seq), closure_obstruction(np.array(seq)))


def test_small_singular_value_warns():
    m = np.broadcast_to(np.diag([1.0, 0.05]).astype(complex), (3, 2, 2))
    with pytest.warns(UserWarning, match="singular value"):
        transport_batch(m, np.eye(2, dtype=complex))


def test_well_conditioned_transport_is_silent():
    p = random_provider(1, 4, 2, seed=0, size=32)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        transport_axis(p, np.eye(2, dtype=complex), axis=0)


def test_singular_overlap_raises():
    m = np.broadcast_to(np.diag([1.0, 0.0]).astype(complex), (3, 2, 2))
    with pytest.raises(RankDeficient):
        transport_batch(m, np.eye(2, dtype=complex))


def test_provider_rejects_mismatched_grid():
    with pytest.raises(ValueError):
        ArrayProvider(KGrid((4,)), np.zeros((5, 2, 1)))
