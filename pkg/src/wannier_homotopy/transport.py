"""Discrete parallel transport in gauge space.

A frame at grid point ``k`` is stored as an ``N x N`` unitary ``U(k)`` whose
columns are coefficients in the local occupied eigenbasis ``Psi(k)``, so the
physical frame is ``Psi(k) U(k)``. Projecting that frame onto the occupied
space at a neighbour ``k'`` is left multiplication by the overlap
``M(k', k) = Psi(k')* Psi(k)``; a transport step is that projection followed
by Loewdin orthonormalization.
"""
import warnings

import numpy as np

from .config import DEFAULT_TOL
from .grid import KGrid
from .matcore import dagger, loewdin
from .models import sample_grid


class OverlapProvider:
    """Source of overlaps ``M(k, k + offset)`` between occupied eigenbases.

    Subclasses implement :meth:`overlap`; :meth:`axis_overlaps` has a generic
    loop fallback that array-backed providers override.
    """

    grid: KGrid
    n_occ: int

    def overlap(self, k, offset):
        """``M_mn = <psi_m(k) | psi_n(k + offset)>`` for grid index ``k``."""
        raise NotImplementedError

    def axis_overlaps(self, axis, sign=1):
        """``M(k, k + sign e_axis)`` for every grid point, shape ``sizes + (N, N)``."""
        offset = [0] * self.grid.dim
        offset[axis] = sign
        out = np.empty(self.grid.shape + (self.n_occ, self.n_occ), dtype=complex)
        for idx in np.ndindex(*self.grid.shape):
            out[idx] = self.overlap(idx, tuple(offset))
        return out


class ArrayProvider(OverlapProvider):
    """Provider backed by explicit occupied eigenvectors on every grid point.

    ``occ`` has shape ``sizes + (n_bands, N)`` with orthonormal columns.
    """

    def __init__(self, grid, occ, energies=None, source=None):
        self.grid = grid
        self.occ = np.asarray(occ, dtype=complex)
        if self.occ.shape[:grid.dim] != grid.shape:
            raise ValueError(f"occupied vectors {self.occ.shape} do not match grid {grid.shape}")
        self.n_occ = self.occ.shape[-1]
        self.energies = energies
        self.source = source

    @classmethod
    def from_model(cls, model, grid, tol=DEFAULT_TOL):
        if model.dim != grid.dim:
            raise ValueError(f"model is {model.dim}d but grid is {grid.dim}d")
        occ, energies, _ = sample_grid(model, grid, tol=tol)
        return cls(grid, occ, energies, source=model.name)

    def overlap(self, k, offset):
        k = self.grid.wrap(k)
        k2 = self.grid.wrap(np.add(k, offset))
        return dagger(self.occ[k]) @ self.occ[k2]

    def axis_overlaps(self, axis, sign=1):
        shifted = np.roll(self.occ, -sign, axis=axis)
        return dagger(self.occ) @ shifted

    def offset_overlaps(self, offset):
        shifted = self.occ
        for axis, o in enumerate(offset):
            if o:
                shifted = np.roll(shifted, -int(o), axis=axis)
        return dagger(self.occ) @ shifted

    def regauged(self, gauge):
        """Same subspaces with eigenbasis ``Psi(k) G(k)``."""
        return ArrayProvider(self.grid, self.occ @ gauge, self.energies, self.source)


class ConstantProvider(OverlapProvider):
    """Constant projector: every overlap is the identity."""

    def __init__(self, grid, n_occ):
        self.grid = grid
        self.n_occ = n_occ

    def overlap(self, k, offset):
        return np.eye(self.n_occ, dtype=complex)

    def axis_overlaps(self, axis, sign=1):
        return np.broadcast_to(np.eye(self.n_occ, dtype=complex),
                               self.grid.shape + (self.n_occ, self.n_occ)).copy()

    def offset_overlaps(self, offset):
        return self.axis_overlaps(0)


def _step_offset(grid, k_from, k_to):
    offset = []
    for a, b, s in zip(k_from, k_to, grid.sizes):
        d = (int(b) - int(a)) % s
        if d > s // 2:
            d -= s
        offset.append(d)
    if sum(abs(d) for d in offset) > 1:
        raise ValueError(f"{k_from} and {k_to} are not adjacent grid points")
    return tuple(offset)


def _warn_sigma(sigma_min, tol):
    smallest = float(np.min(sigma_min)) if np.size(sigma_min) else 1.0
    if smallest < tol.rank_warn:
        warnings.warn(
            f"transport step with smallest singular value {smallest:.3e}; grid may be too coarse",
            stacklevel=3,
        )
    return smallest


def transport_step(provider, u_from, k_from, k_to, tol=DEFAULT_TOL):
    """Transport a gauge-space frame from ``k_from`` to the adjacent ``k_to``."""
    offset = _step_offset(provider.grid, k_from, k_to)
    m = dagger(provider.overlap(k_from, offset))  # M(k_to, k_from)
    out, sigma = loewdin(m @ u_from, return_sigma=True, tol=tol)
    _warn_sigma(sigma, tol)
    return out


def transport_line(provider, u_start, line, closed=False, tol=DEFAULT_TOL):
    """Transport ``u_start`` along consecutive grid points.

    With ``closed=True`` one more step is taken from the last point back to
    ``line[0]`` through the boundary identification, and the result has
    ``len(line) + 1`` entries.
    """
    line = [tuple(int(i) for i in np.atleast_1d(p)) for p in line]
    seq = [np.asarray(u_start, dtype=complex)]
    stops = line[1:] + ([line[0]] if closed else [])
    prev = line[0]
    for p in stops:
        seq.append(transport_step(provider, seq[-1], prev, p, tol=tol))
        prev = p
    return seq


def transport_batch(line_overlaps, u_start, tol=DEFAULT_TOL):
    """Vectorized transport along many parallel lines at once.

    Parameters
    ----------
    line_overlaps : (..., L, N, N) array
        ``line_overlaps[..., i]`` is ``M(k_i, k_{i+1})`` along each line.
    u_start : (..., N, N) array

    Returns
    -------
    (..., L + 1, N, N) array of transported frames; the last entry sits on the
    point reached after ``L`` steps.
    """
    steps = line_overlaps.shape[-3]
    out = np.empty(line_overlaps.shape[:-3] + (steps + 1,) + u_start.shape[-2:], dtype=complex)
    out[..., 0, :, :] = u_start
    worst = 1.0
    for i in range(steps):
        nxt, sigma = loewdin(dagger(line_overlaps[..., i, :, :]) @ out[..., i, :, :],
                             return_sigma=True, tol=tol)
        out[..., i + 1, :, :] = nxt
        worst = min(worst, float(np.min(sigma)) if np.size(sigma) else 1.0)
    _warn_sigma(worst, tol)
    return out


def transport_axis(provider, u_start, axis, tol=DEFAULT_TOL):
    """Transport frames given on the slice ``k_axis = 0`` along ``axis``.

    ``u_start`` has shape ``(sizes without axis) + (N, N)``. Returns an array
    of shape ``(sizes without axis) + (n_axis + 1, N, N)`` whose last entry is
    the frame carried once around the period.
    """
    m = provider.axis_overlaps(axis)
    m = np.moveaxis(m, axis, -3)
    return transport_batch(m, u_start, tol=tol)


def transport_projected(projectors, w_start, tol=DEFAULT_TOL):
    """Transport orthonormal columns through a sequence of ambient projectors.

    ``projectors`` has shape ``(..., T, N, N)`` and ``w_start`` shape
    ``(..., N, m)`` with columns in the range of ``projectors[..., 0]``.
    Each step is ``W <- loewdin(P_next W)``. Returns ``(..., T, N, m)``.
    """
    steps = projectors.shape[-3]
    out = np.empty(projectors.shape[:-3] + (steps,) + w_start.shape[-2:], dtype=complex)
    out[..., 0, :, :] = w_start
    for i in range(1, steps):
        out[..., i, :, :] = loewdin(projectors[..., i, :, :] @ out[..., i - 1, :, :], tol=tol)
    return out


def closure_obstruction(u_seq, tol=DEFAULT_TOL):
    """``V_obs = U_start* U_end`` for a frame transported around a full period.

    ``u_seq`` may be a list or an array whose axis ``-3`` runs along the line;
    the result is projected back onto the unitary group.
    """
    if isinstance(u_seq, (list, tuple)):
        start, end = u_seq[0], u_seq[-1]
    else:
        start, end = u_seq[..., 0, :, :], u_seq[..., -1, :, :]
    return loewdin(dagger(start) @ end, tol=tol)
