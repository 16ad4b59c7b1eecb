"""Dense complex linear algebra on small matrices.

All functions accept a single ``(n, n)`` matrix or a stack ``(..., n, n)``
unless stated otherwise, and never modify their input.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import DEFAULT_TOL
from .errors import BranchCut, NoConvergence, NonHermitian, RankDeficient, WannierError


@dataclass(frozen=True)
class HermEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class AntiHermLog:
    L: np.ndarray
    eigenphases: np.ndarray


def dagger(a):
    return np.swapaxes(a, -1, -2).conj()


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise WannierError(f"{name} has non-finite entries")


def _fro(a):
    return np.linalg.norm(a, axis=(-2, -1))


def fix_phases(vectors):
    """Rotate each column so its largest-modulus entry is real and positive.

    Ties are broken by the lowest row index, which keeps the result a
    deterministic function of the input.
    """
    idx = np.argmax(np.abs(vectors), axis=-2)
    pivots = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    phase = pivots / np.abs(pivots)
    return vectors * phase.conj()


def herm_eig(a, tol=DEFAULT_TOL):
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    Eigenvalues are ascending and eigenvectors are phase fixed with
    :func:`fix_phases`.
    """
    a = np.asarray(a, dtype=complex)
    _check_finite(a, "matrix")
    if a.shape[-1] != a.shape[-2]:
        raise NonHermitian(f"matrix of shape {a.shape} is not square")
    asym = _fro(a - dagger(a))
    if np.any(asym > tol.hermitian * np.maximum(_fro(a), 1e-300)):
        raise NonHermitian(f"asymmetry {float(np.max(asym)):.3e} exceeds tolerance")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return HermEig(w, fix_phases(v))


def loewdin(a, threshold=None, return_sigma=False, tol=DEFAULT_TOL):
    """Closest matrix with orthonormal columns, ``A (A*A)^{-1/2}``.

    Computed from the SVD ``A = W S X*`` as ``W X*``. Raises
    :class:`RankDeficient` when the smallest singular value drops below
    ``threshold`` (default ``tol.rank_error``).
    """
    a = np.asarray(a, dtype=complex)
    _check_finite(a, "matrix")
    if threshold is None:
        threshold = tol.rank_error
    w, s, xh = np.linalg.svd(a, full_matrices=False)
    sigma_min = s[..., -1] if s.shape[-1] else np.ones(s.shape[:-1])
    smallest = float(np.min(sigma_min)) if np.size(sigma_min) else 1.0
    if smallest < threshold:
        raise RankDeficient(smallest, threshold)
    out = w @ xh
    if return_sigma:
        return out, sigma_min
    return out


def unitarity_error(u):
    """Max-entry deviation of ``U*U`` from the identity, over the whole stack."""
    u = np.asarray(u)
    n = u.shape[-1]
    return float(np.max(np.abs(dagger(u) @ u - np.eye(n)), initial=0.0))


def log_unitary(u, tol=DEFAULT_TOL, branch_tol=None):
    """Principal logarithm of a single unitary matrix.

    The unitary is diagonalized with a complex Schur decomposition, which is
    diagonal up to rounding for normal matrices and keeps an orthonormal basis
    inside clusters of nearly equal eigenvalues.

    Parameters
    ----------
    u : (n, n) array
    branch_tol : float, optional
        Raise :class:`BranchCut` if an eigenphase lies within this distance of
        pi. Defaults to ``tol.branch_cut``; pass 0 to accept any phase.
    """
    u = np.asarray(u, dtype=complex)
    _check_finite(u, "matrix")
    n = u.shape[-1]
    if unitarity_error(u) > tol.unitary:
        raise WannierError(f"matrix is not unitary (error {unitarity_error(u):.3e})")
    if branch_tol is None:
        branch_tol = tol.branch_cut
    t, q = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    if n and branch_tol > 0:
        worst = phases[np.argmax(np.abs(phases))]
        if np.pi - abs(worst) < branch_tol:
            raise BranchCut(worst)
    L = (q * (1j * phases)) @ q.conj().T
    L = 0.5 * (L - L.conj().T)
    return AntiHermLog(L, np.sort(phases))


def log_unitary_shifted(u, tol=DEFAULT_TOL):
    """Logarithm that steps around the branch cut with a scalar phase.

    Tries :func:`log_unitary` first. On :class:`BranchCut`, takes the
    logarithm of ``exp(-i eps) U`` and adds ``i eps I`` back, which is still a
    logarithm of ``U``. Returns ``(AntiHermLog, shifted)``.
    """
    try:
        return log_unitary(u, tol=tol), False
    except BranchCut:
        eps = tol.branch_shift
        res = log_unitary(np.exp(-1j * eps) * np.asarray(u, dtype=complex), tol=tol)
        n = res.L.shape[-1]
        L = res.L + 1j * eps * np.eye(n)
        return AntiHermLog(L, np.sort(res.eigenphases + eps)), True


def exp_antiherm(L, s=1.0, tol=DEFAULT_TOL):
    """``exp(s L)`` for anti-Hermitian ``L`` (or a stack), exactly unitary.

    ``s`` may be a scalar or an array broadcasting against the stack shape.
    """
    L = np.asarray(L, dtype=complex)
    _check_finite(L, "matrix")
    skew = _fro(L + dagger(L))
    if np.any(skew > tol.antihermitian * np.maximum(_fro(L), 1.0)):
        raise WannierError(f"matrix is not anti-Hermitian (error {float(np.max(skew)):.3e})")
    h = -1j * L
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    s = np.asarray(s, dtype=float)
    phase = np.exp(1j * s[..., None] * w)
    return (v * phase[..., None, :]) @ dagger(v)
