import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from oracles import random_unitary
from wannier_homotopy.config import DEFAULT_TOL
from wannier_homotopy.errors import BranchCut, NonHermitian, RankDeficient
from wannier_homotopy.matcore import (dagger, exp_antiherm, fix_phases, herm_eig, loewdin,
                                      log_unitary, log_unitary_shifted, unitarity_error)

dims = st.integers(min_value=1, max_value=6)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


@given(dims, seeds)
def test_herm_eig_reconstructs_and_sorts(n, seed):
    a = random_hermitian(n, seed)
    eig = herm_eig(a)
    v, w = eig.eigenvectors, eig.eigenvalues
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, a, atol=1e-12)
    assert unitarity_error(v) < 1e-12


@given(dims, seeds)
def test_herm_eig_phase_convention(n, seed):
    v = herm_eig(random_hermitian(n, seed)).eigenvectors
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(n)]
    assert np.allclose(pivots.imag, 0, atol=1e-14)
    assert np.all(pivots.real > 0)


def test_herm_eig_batched_matches_single():
    a = np.stack([random_hermitian(4, s) for s in range(5)])
    batched = herm_eig(a)
    for i in range(5):
        single = herm_eig(a[i])
        assert np.allclose(batched.eigenvalues[i], single.eigenvalues)
        assert np.allclose(batched.eigenvectors[i], single.eigenvectors)


def test_herm_eig_is_deterministic_on_degenerate_input():
    a = np.diag([1.0, 1.0, 2.0]).astype(complex)
    first, second = herm_eig(a), herm_eig(a.copy())
    assert np.array_equal(first.eigenvectors, second.eigenvectors)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitian):
        herm_eig(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_fix_phases_is_idempotent(rng):
    v = random_unitary(4, 3)
    once = fix_phases(v)
    assert np.allclose(fix_phases(once), once)


@given(dims, seeds)
def test_loewdin_matches_polar_factor(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    u = loewdin(a)
    polar, _ = scipy.linalg.polar(a)
    assert unitarity_error(u) < 1e-12
    assert np.allclose(u, polar, atol=1e-10)


def test_loewdin_rectangular_has_orthonormal_columns(rng):
    a = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    u = loewdin(a)
    assert np.allclose(dagger(u) @ u, np.eye(3), atol=1e-12)


@given(st.integers(1, 5), seeds)
def test_loewdin_fixes_unitaries(n, seed):
    u = random_unitary(n, seed)
    assert np.allclose(loewdin(u), u, atol=1e-12)


def test_loewdin_rank_deficient():
    with pytest.raises(RankDeficient) as info:
        loewdin(np.diag([1.0, 1e-12]))
    assert info.value.sigma_min == pytest.approx(1e-12)


def test_loewdin_returns_smallest_singular_value():
    _, sigma = loewdin(np.diag([2.0, 0.5]), return_sigma=True)
    assert sigma == pytest.approx(0.5)


@given(st.integers(1, 6), seeds)
def test_log_exp_round_trip(n, seed):
    u = random_unitary(n, seed)
    try:
        log = log_unitary(u)
    except BranchCut:
        return
    L = log.L
    assert np.allclose(L, -L.conj().T, atol=1e-12)
    assert np.all(np.abs(log.eigenphases) <= np.pi)
    assert np.allclose(exp_antiherm(L), u, atol=1e-10)


@given(st.integers(1, 5), seeds)
def test_log_matches_scipy_logm_away_from_cut(n, seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(n, seed)
    h *= 2.5 / max(np.max(np.abs(np.linalg.eigvalsh(h))), 1e-9) * rng.uniform(0.1, 1.0)
    u = scipy.linalg.expm(1j * h)
    assert np.allclose(log_unitary(u).L, scipy.linalg.logm(u), atol=1e-9)


@given(st.integers(1, 5), seeds)
def test_exp_matches_scipy_expm(n, seed):
    L = 1j * random_hermitian(n, seed)
    u = exp_antiherm(L)
    assert unitarity_error(u) < 1e-12
    assert np.allclose(u, scipy.linalg.expm(L), atol=1e-10)


def test_exp_broadcasts_over_parameter():
    L = 1j * random_hermitian(3, 7)
    s = np.linspace(0, 1, 5)
    stack = exp_antiherm(L, s)
    assert stack.shape == (5, 3, 3)
    for i, si in enumerate(s):
        assert np.allclose(stack[i], scipy.linalg.expm(si * L), atol=1e-10)


def test_branch_cut_detected_and_shifted():
    u = np.diag(np.exp(1j * np.array([np.pi, 0.3])))
    with pytest.raises(BranchCut):
        log_unitary(u)
    log, shifted = log_unitary_shifted(u)
    assert shifted
    assert np.allclose(exp_antiherm(log.L), u, atol=1e-10)


def test_shift_not_used_when_unnecessary():
    u = np.diag(np.exp(1j * np.array([2.0, -1.0])))
    _, shifted = log_unitary_shifted(u)
    assert not shifted


def test_log_of_degenerate_cluster_keeps_basis():
    # two nearly equal eigenvalues; the logarithm must still exponentiate back
    q = random_unitary(3, 11)
    u = q @ np.diag(np.exp(1j * np.array([0.4, 0.4 + 1e-13, -1.2]))) @ q.conj().T
    assert np.allclose(exp_antiherm(log_unitary(u).L), u, atol=1e-10)


def test_log_rejects_non_unitary():
    with pytest.raises(Exception):
        log_unitary(np.diag([1.0, 2.0]))


def test_default_tolerances_are_immutable():
    with pytest.raises(Exception):
        DEFAULT_TOL.unitary = 1.0
    assert DEFAULT_TOL.with_overrides(unitary=1e-6).unitary == 1e-6
