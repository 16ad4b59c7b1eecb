"""Quality measures for frames: regularity, Chern numbers, spreads, convergence."""
import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL
from .errors import IncompleteShells, NonIntegerResidual, WannierError
from .frames import frame_2d
from .grid import KGrid
from .matcore import dagger
from .transport import ArrayProvider


@dataclass
class RegularityField:
    """Finite-difference estimate of ``||grad_k u||`` at every grid point."""

    grid: KGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def max(self):
        return float(np.max(self.values))

    @property
    def mean(self):
        return float(np.mean(self.values))


def offset_overlaps(provider, offset):
    """``M(k, k + offset)`` on the whole grid, using array shortcuts when available."""
    if hasattr(provider, "offset_overlaps"):
        return provider.offset_overlaps(offset)
    nz = [a for a, o in enumerate(offset) if o]
    if len(nz) == 1 and abs(offset[nz[0]]) == 1:
        return provider.axis_overlaps(nz[0], offset[nz[0]])
    n = provider.n_occ
    out = np.empty(provider.grid.shape + (n, n), dtype=complex)
    for idx in np.ndindex(*provider.grid.shape):
        out[idx] = provider.overlap(idx, tuple(offset))
    return out


def regularity(frame, provider):
    """Sum over axes of ``||M(k, k+d) U(k+d) - U(k)||_F / d`` with ``d`` the grid spacing.

    The difference compares the frame at ``k + d``, projected back onto the
    occupied space at ``k``, with the frame at ``k``. It is the gauge-space
    form of a forward difference of the physical frame.
    """
    grid = frame.grid
    if provider.grid.sizes != grid.sizes:
        raise ValueError("frame and provider live on different grids")
    u = frame.coeffs
    values = np.zeros(grid.shape)
    for axis, n in enumerate(grid.sizes):
        m = provider.axis_overlaps(axis)
        diff = m @ np.roll(u, -1, axis=axis) - u
        values += np.linalg.norm(diff, axis=(-2, -1)) * n
    return RegularityField(grid, values, {"method": frame.metadata.get("method")})


def chern_plaquette(provider, tol=DEFAULT_TOL):
    """Chern number from gauge-invariant plaquette phases.

    Each plaquette contributes ``arg det`` of the overlap product around
    ``k -> k + e2 -> k + e1 + e2 -> k + e1 -> k``. With this orientation the
    result equals the winding of the obstruction determinant built by
    transporting along ``k2``.
    """
    if provider.grid.dim != 2:
        raise ValueError("chern_plaquette needs a 2d grid")
    m1 = provider.axis_overlaps(0)  # M(k, k + e1)
    m2 = provider.axis_overlaps(1)  # M(k, k + e2)
    loop = (m2 @ np.roll(m1, -1, axis=1)
            @ dagger(np.roll(m2, -1, axis=0)) @ dagger(m1))
    flux = np.angle(np.linalg.det(loop))
    c = float(np.sum(flux)) / (2 * np.pi)
    if abs(c - round(c)) > tol.integer_residual:
        raise NonIntegerResidual(c)
    return int(round(c))


# ---------------------------------------------------------------------------
# Marzari-Vanderbilt spread


@dataclass
class SpreadGeometry:
    """Reciprocal metric and neighbour shells for the discrete spread.

    ``recip`` holds the Cartesian reciprocal lattice vectors as rows (with the
    factor 2 pi). ``offsets`` are integer grid offsets of the neighbours and
    ``weights`` their completeness weights.
    """

    recip: np.ndarray
    offsets: list
    weights: np.ndarray

    def bvectors(self, grid):
        frac = np.asarray(self.offsets, dtype=float) / np.asarray(grid.sizes)
        return frac @ self.recip


def solve_weights(bvecs, tol=DEFAULT_TOL):
    """Weights with ``sum_b w_b b b^T = I``; raises :class:`IncompleteShells` if impossible."""
    bvecs = np.asarray(bvecs, dtype=float)
    d = bvecs.shape[1]
    iu = np.triu_indices(d)
    a = np.stack([np.outer(b, b)[iu] for b in bvecs], axis=1)
    target = np.eye(d)[iu]
    w, *_ = np.linalg.lstsq(a, target, rcond=None)
    resid = float(np.max(np.abs(a @ w - target)))
    if resid > tol.completeness:
        raise IncompleteShells(f"completeness residual {resid:.3e} with {len(bvecs)} neighbours")
    return w


def nearest_neighbor_geometry(grid, recip=None, tol=DEFAULT_TOL):
    """Shell of the ``2d`` axis neighbours ``+-e_i``.

    ``recip`` defaults to ``2 pi I``, i.e. a unit hypercubic cell, which gives
    dimensionless spreads for toy models. Non-orthogonal metrics generally
    need more shells and raise :class:`IncompleteShells` here.
    """
    d = grid.dim
    recip = 2 * np.pi * np.eye(d) if recip is None else np.asarray(recip, dtype=float)
    offsets = []
    for axis in range(d):
        for sign in (1, -1):
            o = [0] * d
            o[axis] = sign
            offsets.append(tuple(o))
    geom = SpreadGeometry(recip, offsets, np.zeros(len(offsets)))
    geom.weights = solve_weights(geom.bvectors(grid), tol=tol)
    return geom


@dataclass
class SpreadReport:
    omega_total: float
    per_band_centers: np.ndarray
    per_band_spreads: np.ndarray
    omega_invariant: float


def spread(frame, provider, geometry=None, tol=DEFAULT_TOL):
    """Marzari-Vanderbilt spread of the Wannier functions of a frame.

    Uses ``M~ = U(k)* M(k, k+b) U(k+b)`` and the principal branch of
    ``Im ln M~_nn``. Also reports the gauge-invariant part
    ``Omega_I = (1/N_k) sum_{k,b} w_b (N - sum_mn |M~_mn|^2)``.
    """
    grid = frame.grid
    if geometry is None:
        geometry = nearest_neighbor_geometry(grid, tol=tol)
    bvecs = geometry.bvectors(grid)
    w = np.asarray(geometry.weights, dtype=float)
    d = grid.dim
    iu = np.triu_indices(d)
    check = sum(wb * np.outer(b, b)[iu] for wb, b in zip(w, bvecs))
    if np.max(np.abs(check - np.eye(d)[iu])) > tol.completeness:
        raise IncompleteShells("shell weights do not satisfy completeness")

    u = frame.coeffs
    n = frame.n
    nk = grid.n_points
    centers = np.zeros((n, d))
    second = np.zeros(n)
    omega_i = 0.0
    smallest = np.inf
    for offset, b, wb in zip(geometry.offsets, bvecs, w):
        m = offset_overlaps(provider, offset)
        u_b = u
        for axis, o in enumerate(offset):
            if o:
                u_b = np.roll(u_b, -int(o), axis=axis)
        mt = dagger(u) @ m @ u_b
        diag = np.diagonal(mt, axis1=-2, axis2=-1).reshape(-1, n)
        mod2 = np.abs(diag) ** 2
        smallest = min(smallest, float(np.sqrt(np.min(mod2))))
        phase = np.angle(diag)
        centers -= wb * np.outer(np.sum(phase, axis=0), b) / nk
        second += wb * np.sum(1 - mod2 + phase ** 2, axis=0) / nk
        omega_i += wb * float(np.sum(n - np.sum(np.abs(mt) ** 2, axis=(-2, -1)))) / nk
    if smallest < tol.small_overlap:
        warnings.warn(f"|M~_nn| as small as {smallest:.3f}; Wannier centers are ill-conditioned",
                      stacklevel=2)
    spreads = second - np.sum(centers ** 2, axis=1)
    return SpreadReport(float(np.sum(spreads)), centers, spreads, omega_i)


# ---------------------------------------------------------------------------
# Grid convergence


CONVERGENCE_FIELDS = ("size", "status", "max_regularity", "mean_regularity", "omega", "error")


def convergence_study(model, method, sizes, seed=0, tol=DEFAULT_TOL):
    """Build ``frame_2d`` on square grids of the given sizes and tabulate quality measures.

    Failures are recorded in the ``status`` and ``error`` columns rather than
    raised.
    """
    if model.dim != 2:
        raise ValueError("convergence_study needs a 2d model")
    rows = []
    for size in sizes:
        row = dict.fromkeys(CONVERGENCE_FIELDS, "")
        row["size"] = int(size)
        try:
            provider = ArrayProvider.from_model(model, KGrid((size, size)), tol=tol)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                frame = frame_2d(provider, method=method, seed=seed, tol=tol)
                reg = regularity(frame, provider)
                omega = spread(frame, provider, tol=tol).omega_total
            row.update(status="ok", max_regularity=reg.max, mean_regularity=reg.mean, omega=omega)
        except WannierError as exc:
            row.update(status=type(exc).__name__, error=str(exc))
        rows.append(row)
    return rows


def convergence_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CONVERGENCE_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
