"""Winding numbers and contractions of unitary loops and surfaces.

Two ways to deform a loop ``k -> V(k)`` in U(N) to the identity:

* :func:`contract_log` follows continuous eigenphases and uses
  ``exp((1 - t) L(k))``. It breaks down as soon as individual eigenvalues
  wind, even when the determinant does not.
* :func:`contract_columns_1d` / :func:`contract_columns_2d` contract the
  columns one at a time. Column ``n`` is kept orthogonal to the columns
  already built by transporting the remaining ones through the running
  complement projector; the last column only carries a phase.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT_TOL
from .errors import (AliasedPhase, EigenvalueCollision, EigenvalueWinding, NoSafeVector,
                     NonIntegerResidual, PhaseUnwrapInconsistent, WindingObstruction)
from .grid import KGrid
from .matcore import dagger, exp_antiherm, herm_eig, log_unitary, log_unitary_shifted
from .transport import transport_projected

DEFAULT_T_POINTS = 33


@dataclass
class UnitaryField:
    """Unitary matrices on every point of a 1d or 2d grid, shape ``sizes + (N, N)``."""

    grid: KGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[:-2] != self.grid.shape:
            raise ValueError(f"values {self.values.shape} do not match grid {self.grid.shape}")

    @property
    def n(self):
        return self.values.shape[-1]


@dataclass
class Homotopy:
    """A unitary field sampled on ``k-grid x t-grid``.

    ``values`` has shape ``sizes + (T, N, N)``; ``values[..., 0, :, :]`` is the
    input field and ``values[..., -1, :, :]`` the identity.
    """

    grid: KGrid
    t: np.ndarray
    values: np.ndarray
    max_step: float
    metadata: dict = field(default_factory=dict)

    def slice(self, i):
        return UnitaryField(self.grid, self.values[..., i, :, :])


@dataclass(frozen=True)
class WindingReport:
    total: int
    per_eigenvalue: tuple = None
    max_phase_step: float = 0.0


def _wrap(x):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def _max_step(values, k_axes):
    """Largest Frobenius distance between neighbours along k (periodic) and t."""
    worst = 0.0
    for ax in range(k_axes):
        diff = np.roll(values, -1, axis=ax) - values
        worst = max(worst, float(np.max(np.linalg.norm(diff, axis=(-2, -1)))))
    diff = np.diff(values, axis=k_axes)
    if diff.size:
        worst = max(worst, float(np.max(np.linalg.norm(diff, axis=(-2, -1)))))
    return worst


def det_phase_steps(loop):
    """Principal phase increments of ``det V`` between consecutive points, wrapping."""
    d = np.linalg.det(loop.values)
    return np.angle(np.roll(d, -1) * np.conj(d))


def winding_det_real(loop, tol=DEFAULT_TOL):
    steps = det_phase_steps(loop)
    if np.max(np.abs(steps), initial=0.0) >= np.pi - tol.aliased_phase:
        raise AliasedPhase(
            f"determinant phase step {float(np.max(np.abs(steps))):.3f} too close to pi"
        )
    return float(np.sum(steps) / (2 * np.pi))


def winding_det(loop, tol=DEFAULT_TOL):
    """Winding number of ``det V`` around a loop sampled on a 1d grid."""
    w = winding_det_real(loop, tol=tol)
    if abs(w - round(w)) > tol.integer_residual:
        raise NonIntegerResidual(w)
    return int(round(w))


@dataclass
class _Tracking:
    phases: np.ndarray  # (n + 1, N), continuous along the closed loop
    order: np.ndarray  # (n, N) eigen index of each branch at each point
    vectors: np.ndarray  # (n, N, N) Schur vectors
    closed: bool  # branches return to their own starting eigenvalue
    max_step: float


def _eig_unitary(values):
    lam = np.empty(values.shape[:-1], dtype=complex)
    vecs = np.empty(values.shape, dtype=complex)
    for i, v in enumerate(values):
        t, q = scipy.linalg.schur(v, output="complex")
        lam[i] = np.diag(t)
        vecs[i] = q
    return lam, vecs


def track_eigenphases(loop, tol=DEFAULT_TOL):
    """Follow each eigenphase continuously around a loop.

    Branches are matched between neighbouring points against a linear
    prediction from the two previous points, so transversal crossings are
    followed through. Matching is ambiguous when two branches with different
    histories predict the same phase but land on distinct eigenvalues, which
    raises :class:`EigenvalueCollision`.
    """
    values = loop.values
    n, N = values.shape[0], values.shape[-1]
    lam, vecs = _eig_unitary(values)
    theta = np.angle(lam)
    phases = np.empty((n + 1, N))
    order = np.empty((n, N), dtype=int)
    order[0] = np.argsort(theta[0], kind="stable")
    phases[0] = theta[0][order[0]]
    eps = tol.eigenvalue_collision
    for i in range(n):
        j = (i + 1) % n
        prev = phases[i - 1] if i > 0 else phases[i]
        pred = 2 * phases[i] - prev
        cost = np.abs(_wrap(theta[j][None, :] - pred[:, None]))
        rows, cols = linear_sum_assignment(cost)
        assign = cols[np.argsort(rows)]
        target = theta[j][assign]
        for a in range(N):
            for b in range(a + 1, N):
                if abs(_wrap(pred[a] - pred[b])) >= eps:
                    continue
                if abs(_wrap(target[a] - target[b])) < eps:
                    continue
                same_history = (abs(_wrap(phases[i, a] - phases[i, b])) < eps
                                and abs(_wrap(prev[a] - prev[b])) < eps)
                if not same_history:
                    raise EigenvalueCollision(
                        f"eigenphase branches {a} and {b} cannot be told apart near k index {j}"
                    )
        phases[i + 1] = phases[i] + _wrap(target - phases[i])
        if j:
            order[j] = assign
    steps = np.abs(np.diff(phases, axis=0))
    max_step = float(np.max(steps, initial=0.0))
    if max_step >= np.pi - tol.aliased_phase:
        raise AliasedPhase(f"eigenphase step {max_step:.3f} too close to pi")
    drift = np.abs(_wrap(phases[-1] - phases[0]))
    closed = bool(np.all(drift < max(eps, 1e-8)))
    return _Tracking(phases, order, vecs, closed, max_step)


def winding_eigenvalues(loop, tol=DEFAULT_TOL):
    """Winding of the determinant and, when tracking closes, of each eigenvalue.

    ``per_eigenvalue`` is sorted in decreasing order and is ``None`` if the
    eigenvalues are permuted among themselves after one period.
    """
    total = winding_det(loop, tol=tol)
    tr = track_eigenphases(loop, tol=tol)
    per = None
    if tr.closed:
        raw = (tr.phases[-1] - tr.phases[0]) / (2 * np.pi)
        per = tuple(sorted((int(round(w)) for w in raw), reverse=True))
    return WindingReport(total=total, per_eigenvalue=per, max_phase_step=tr.max_step)


def _t_grid(t_grid):
    if t_grid is None:
        t_grid = DEFAULT_T_POINTS
    if np.isscalar(t_grid):
        return np.linspace(0.0, 1.0, int(t_grid))
    t = np.asarray(t_grid, dtype=float)
    if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
        raise ValueError("t grid must increase from 0 to 1")
    return t


def continuous_logs(loop, tol=DEFAULT_TOL):
    """Anti-Hermitian ``L(k)`` with ``exp(L(k)) = V(k)``, continuous in ``k``.

    Raises :class:`EigenvalueWinding` if some eigenvalue winds, which makes a
    continuous periodic logarithm impossible.
    """
    tr = track_eigenphases(loop, tol=tol)
    if not tr.closed:
        raise EigenvalueCollision("eigenvalues are permuted after one period")
    windings = np.rint((tr.phases[-1] - tr.phases[0]) / (2 * np.pi)).astype(int)
    if np.any(windings != 0):
        raise EigenvalueWinding(sorted(windings.tolist(), reverse=True))
    shift = 2 * np.pi * np.round(tr.phases[0] / (2 * np.pi))
    phases = tr.phases[:-1] - shift
    n = loop.values.shape[0]
    logs = np.empty_like(loop.values)
    for i in range(n):
        q = tr.vectors[i][:, tr.order[i]]
        L = (q * (1j * phases[i])) @ q.conj().T
        logs[i] = 0.5 * (L - L.conj().T)
    return logs


def principal_logs(values, tol=DEFAULT_TOL):
    """Pointwise principal logarithms, discontinuous where an eigenvalue crosses -1."""
    flat = values.reshape((-1,) + values.shape[-2:])
    out = np.array([log_unitary(v, tol=tol, branch_tol=0.0).L for v in flat])
    return out.reshape(values.shape)


def contract_log(loop, t_grid=None, forced=False, tol=DEFAULT_TOL):
    """Homotopy ``exp((1 - t) L(k))`` from a logarithm of the loop.

    With ``forced=True`` the continuity requirement is dropped and pointwise
    principal logarithms are used; the result is discontinuous whenever an
    eigenvalue winds.
    """
    t = _t_grid(t_grid)
    logs = principal_logs(loop.values, tol) if forced else continuous_logs(loop, tol)
    s = (1.0 - t)[None, :]
    values = exp_antiherm(logs[:, None, :, :], s, tol=tol)
    return Homotopy(loop.grid, t, values, _max_step(values, 1),
                    metadata={"method": "log-forced" if forced else "log"})


def pick_reference_vector(samples, basis=None, candidates=None, seed=0, floor=None,
                          tol=DEFAULT_TOL):
    """Choose a unit vector whose antipode stays away from every sample.

    Candidates are the coordinate axes followed by random complex Gaussian
    vectors, all projected on the span of ``basis`` and normalized. The winner
    maximizes ``min_k ||sample_k + p||``.

    Parameters
    ----------
    samples : (..., N) array of unit vectors in the subspace
    basis : (N, r) array with orthonormal columns, default the whole space
    seed : int or numpy Generator

    Returns
    -------
    (vector, margin)
    """
    samples = np.asarray(samples, dtype=complex)
    n = samples.shape[-1]
    pts = samples.reshape(-1, n)
    if basis is None:
        basis = np.eye(n, dtype=complex)
    candidates = tol.reference_candidates if candidates is None else int(candidates)
    floor = tol.reference_margin if floor is None else floor
    if basis.shape[1] < 2:
        raise NoSafeVector(0.0, floor)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    proj = basis @ dagger(basis)
    raw = [np.eye(n, dtype=complex)[:, j] for j in range(n)]
    n_random = max(candidates - n, 0)
    gauss = rng.standard_normal((n_random, n)) + 1j * rng.standard_normal((n_random, n))
    raw.extend(gauss)
    best, best_margin = None, -1.0
    count = 0
    for p in raw:
        if count >= candidates:
            break
        q = proj @ p
        norm = np.linalg.norm(q)
        if norm < 1e-8:
            continue
        q = q / norm
        count += 1
        margin = float(np.min(np.linalg.norm(pts + q, axis=-1)))
        if margin > best_margin:
            best, best_margin = q, margin
    if best is None or best_margin < floor:
        raise NoSafeVector(max(best_margin, 0.0), floor)
    return best, best_margin


def _unwrap_loop(z, tol):
    """Continuous phase of unit complex numbers around a closed 1d loop."""
    steps = np.angle(np.roll(z, -1) * np.conj(z))
    if np.max(np.abs(steps), initial=0.0) >= np.pi - tol.aliased_phase:
        raise AliasedPhase(f"phase step {float(np.max(np.abs(steps))):.3f} too close to pi")
    total = float(np.sum(steps)) / (2 * np.pi)
    m = int(round(total))
    phi = np.angle(z[0]) + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    return phi, m


def _unwrap_surface(z, tol):
    """Continuous phase on a 2-torus grid; returns ``(phi, m1, m2)``."""
    steps0 = np.angle(np.roll(z, -1, axis=0) * np.conj(z))
    steps1 = np.angle(np.roll(z, -1, axis=1) * np.conj(z))
    worst = max(np.max(np.abs(steps0)), np.max(np.abs(steps1)))
    if worst >= np.pi - tol.aliased_phase:
        raise AliasedPhase(f"phase step {float(worst):.3f} too close to pi")
    n1, n2 = z.shape
    row = np.angle(z[0, 0]) + np.concatenate([[0.0], np.cumsum(steps0[:-1, 0])])
    phi = row[:, None] + np.concatenate(
        [np.zeros((n1, 1)), np.cumsum(steps1[:, :-1], axis=1)], axis=1)
    # every interior edge must agree with its principal increment
    d0 = np.diff(phi, axis=0) - steps0[:-1, :]
    d1 = np.diff(phi, axis=1) - steps1[:, :-1]
    if max(np.max(np.abs(d0), initial=0.0), np.max(np.abs(d1), initial=0.0)) >= np.pi:
        raise PhaseUnwrapInconsistent("plaquette phases disagree by 2 pi; surface under-resolved")
    wrap0 = (phi[-1, :] + steps0[-1, :] - phi[0, :]) / (2 * np.pi)
    wrap1 = (phi[:, -1] + steps1[:, -1] - phi[:, 0]) / (2 * np.pi)
    m1s, m2s = np.rint(wrap0), np.rint(wrap1)
    if np.any(np.abs(wrap0 - m1s) > tol.integer_residual) or np.any(np.abs(wrap1 - m2s) > tol.integer_residual):
        raise PhaseUnwrapInconsistent("boundary phase increments are not multiples of 2 pi")
    if np.ptp(m1s) or np.ptp(m2s):
        raise PhaseUnwrapInconsistent("boundary windings differ between rows; surface under-resolved")
    return phi, int(m1s[0]), int(m2s[0])


def _contract_columns(values, t, rng, tol):
    """Column-by-column contraction for loops (k_shape 1d) or surfaces (2d)."""
    k_shape = values.shape[:-2]
    k_axes = len(k_shape)
    N = values.shape[-1]
    T = len(t)
    eye = np.eye(N, dtype=complex)
    columns = np.empty(k_shape + (T, N, N), dtype=complex)
    proj = np.broadcast_to(eye, k_shape + (T, N, N)).copy()
    origin = (0,) * k_axes
    meta = {"reference_vectors": [], "margins": []}
    for n in range(N):
        w0 = values[..., :, n:]
        if n == 0:
            w = np.broadcast_to(w0[..., None, :, :], k_shape + (T, N, N)).copy()
        else:
            w = transport_projected(proj, w0, tol=tol)
        if n < N - 1:
            samples = w[..., -1, :, 0]
            proj_end = proj[origin + (-1,)]
            eig = herm_eig(0.5 * (proj_end + dagger(proj_end)), tol=tol)
            basis = eig.eigenvectors[:, n:]
            ref, margin = pick_reference_vector(samples, basis, seed=rng, tol=tol)
            meta["reference_vectors"].append([[float(z.real), float(z.imag)] for z in ref])
            meta["margins"].append(margin)
            c = np.conj(w[..., -1, :, :]).swapaxes(-1, -2) @ ref  # <v~_j(k,1), ref>
            e1 = np.zeros(N - n, dtype=complex)
            e1[0] = 1.0
            tt = t.reshape((1,) * k_axes + (T, 1))
            coeff = (1.0 - tt) * e1 + tt * c[..., None, :]
            coeff /= np.linalg.norm(coeff, axis=-1, keepdims=True)
            col = np.einsum("...tij,...tj->...ti", w, coeff)
        else:
            last = w[..., 0]
            ref = last[origin + (-1,)]
            z = np.einsum("i,...i->...", ref.conj(), last[..., -1, :])
            z = z / np.abs(z)
            if k_axes == 1:
                phi, m = _unwrap_loop(z, tol)
                if m != 0:
                    raise WindingObstruction(m)
            else:
                phi, m1, m2 = _unwrap_surface(z, tol)
                if m1 or m2:
                    raise WindingObstruction(m1, m2)
            col = last * np.exp(-1j * t.reshape((1,) * k_axes + (T, 1)) * phi[..., None, None])
        columns[..., :, :, n] = col
        proj = proj - col[..., :, None] * col[..., None, :].conj()
    v_end = columns[origin + (-1,)]
    meta["endpoint_spread"] = float(np.max(np.abs(columns[..., -1, :, :] - v_end)))
    log_end, shifted = log_unitary_shifted(v_end, tol=tol)
    meta["branch_shifted"] = shifted
    correction = exp_antiherm(log_end.L, -t, tol=tol)  # (T, N, N)
    return columns @ correction, meta


def contract_columns_1d(loop, t_grid=None, seed=0, tol=DEFAULT_TOL):
    """Contract a loop in U(N) to the identity column by column.

    Succeeds exactly when the determinant does not wind; a nonzero winding is
    detected on the last column and raised as :class:`WindingObstruction`.
    """
    t = _t_grid(t_grid)
    rng = np.random.default_rng(seed)
    values, meta = _contract_columns(loop.values, t, rng, tol)
    meta.update(method="columns", seed=seed)
    return Homotopy(loop.grid, t, values, _max_step(values, 1), metadata=meta)


def contract_columns_2d(surface, t_grid=None, seed=0, tol=DEFAULT_TOL):
    """Contract a map from the 2-torus to U(N) to the identity.

    Both boundary loops ``V(., 0)`` and ``V(0, .)`` must have vanishing
    determinant winding.
    """
    t = _t_grid(t_grid)
    m1 = winding_det(UnitaryField(KGrid((surface.grid.sizes[0],)), surface.values[:, 0]), tol)
    m2 = winding_det(UnitaryField(KGrid((surface.grid.sizes[1],)), surface.values[0, :]), tol)
    if m1 or m2:
        raise WindingObstruction(m1, m2)
    rng = np.random.default_rng(seed)
    values, meta = _contract_columns(surface.values, t, rng, tol)
    meta.update(method="columns", seed=seed)
    return Homotopy(surface.grid, t, values, _max_step(values, 2), metadata=meta)
