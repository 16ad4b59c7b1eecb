"""Quasi-periodic Bloch frames in one, two and three dimensions.

The construction is inductive. A frame on the face ``k_d = 0`` is
transported along ``k_d``; the mismatch after one period is the obstruction
``V_obs``, a loop (d=2) or surface (d=3) in U(N). A homotopy from ``V_obs`` to
the identity, evaluated with homotopy time ``t = k_d``, repairs the mismatch.
In one dimension the obstruction is a single matrix and its logarithm is
spread evenly along the line.
"""
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL
from .errors import ChernObstruction
from .grid import KGrid
from .homotopy import (UnitaryField, contract_columns_1d, contract_columns_2d, contract_log,
                       winding_det)
from .matcore import exp_antiherm, log_unitary_shifted, unitarity_error
from .transport import closure_obstruction, transport_batch

METHODS = ("columns", "log", "log-forced")


@dataclass
class GaugeFrame:
    """Frame coefficients ``U(k)`` in the local occupied eigenbasis, shape ``sizes + (N, N)``."""

    grid: KGrid
    coeffs: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.coeffs.shape[-1]

    def unitarity_error(self):
        return unitarity_error(self.coeffs)

    def periodicity_residual(self):
        return max(self.metadata.get("periodicity_residuals", [0.0]))


def _line_frame(line_overlaps, tol):
    """1d construction from overlaps ``M(k_i, k_{i+1})`` along a closed line."""
    n, N = line_overlaps.shape[0], line_overlaps.shape[-1]
    seq = transport_batch(line_overlaps, np.eye(N, dtype=complex), tol=tol)
    v_obs = closure_obstruction(seq, tol=tol)
    log, shifted = log_unitary_shifted(v_obs, tol=tol)
    k = np.arange(n + 1) / n
    corrected = seq @ exp_antiherm(log.L, -k, tol=tol)
    residual = float(np.max(np.abs(corrected[-1] - corrected[0])))
    meta = {"branch_shifted": [shifted], "periodicity_residuals": [residual]}
    return corrected[:-1], meta


def _transported_surface(ov0, ov1, tol):
    """Face frame on ``k2 = 0`` carried along ``k2``, shape ``(n1, n2 + 1, N, N)``."""
    face, meta = _line_frame(ov0[:, 0], tol)
    return transport_batch(ov1, face, tol=tol), meta


def _surface_frame(ov0, ov1, method, seed, tol):
    """2d construction from the two axis-overlap arrays of shape ``(n1, n2, N, N)``."""
    n1, n2 = ov0.shape[:2]
    seq, meta = _transported_surface(ov0, ov1, tol)
    v_obs = closure_obstruction(seq, tol=tol)
    loop = UnitaryField(KGrid((n1,)), v_obs)
    chern = winding_det(loop, tol=tol)
    if chern:
        raise ChernObstruction(chern)
    t = np.arange(n2 + 1) / n2
    if method == "columns":
        hom = contract_columns_1d(loop, t, seed=seed, tol=tol)
    elif method in ("log", "log-forced"):
        hom = contract_log(loop, t, forced=(method == "log-forced"), tol=tol)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    corrected = seq @ hom.values
    residual = float(np.max(np.abs(corrected[:, -1] - corrected[:, 0])))
    meta["periodicity_residuals"].append(residual)
    meta.update(chern=[chern], homotopy=_homotopy_meta(hom))
    return corrected[:, :-1], meta


def _homotopy_meta(hom):
    meta = {k: v for k, v in hom.metadata.items() if k != "seed"}
    meta["max_step"] = hom.max_step
    return meta


def _plane_chern(ov_a, ov_b, tol):
    """Winding of the obstruction loop for a plane spanned by two axes."""
    seq, _ = _transported_surface(ov_a, ov_b, tol)
    v_obs = closure_obstruction(seq, tol=tol)
    return winding_det(UnitaryField(KGrid((v_obs.shape[0],)), v_obs), tol=tol)


def _check_provider(provider, dim):
    if provider.grid.dim != dim:
        raise ValueError(f"expected a {dim}d provider, got {provider.grid.dim}d")
    provider.grid.check_frame_sizes()


def frame_1d(provider, tol=DEFAULT_TOL):
    """Periodic frame along a 1d grid: parallel transport plus an even phase correction."""
    _check_provider(provider, 1)
    coeffs, meta = _line_frame(provider.axis_overlaps(0), tol)
    meta["method"] = "transport"
    return GaugeFrame(provider.grid, coeffs, meta)


def frame_2d(provider, method="columns", seed=0, tol=DEFAULT_TOL):
    """Frame on the 2-torus; raises :class:`ChernObstruction` if the Chern number is nonzero."""
    _check_provider(provider, 2)
    coeffs, meta = _surface_frame(provider.axis_overlaps(0), provider.axis_overlaps(1),
                                  method, seed, tol)
    meta.update(method=method, seed=seed, smooth=(method != "log-forced"))
    return GaugeFrame(provider.grid, coeffs, meta)


def frame_3d(provider, method="columns", seed=0, tol=DEFAULT_TOL):
    """Frame on the 3-torus using the column contraction of the obstruction surface.

    The three Chern numbers are checked first, each as the obstruction winding
    on a coordinate plane through the origin, and reported together.
    """
    _check_provider(provider, 3)
    if method != "columns":
        raise ValueError("only the columns method is available in three dimensions")
    ov = [provider.axis_overlaps(a) for a in range(3)]
    cherns = (
        _plane_chern(ov[1][0], ov[2][0], tol),  # plane k1 = 0
        _plane_chern(ov[0][:, 0], ov[2][:, 0], tol),  # plane k2 = 0
        _plane_chern(ov[0][:, :, 0], ov[1][:, :, 0], tol),  # plane k3 = 0
    )
    if any(cherns):
        raise ChernObstruction(*cherns)
    face, meta = _surface_frame(ov[0][:, :, 0], ov[1][:, :, 0], "columns", seed, tol)
    n3 = provider.grid.sizes[2]
    seq = transport_batch(ov[2], face, tol=tol)  # (n1, n2, n3 + 1, N, N)
    v_obs = closure_obstruction(seq, tol=tol)
    surface = UnitaryField(KGrid(provider.grid.sizes[:2]), v_obs)
    hom = contract_columns_2d(surface, np.arange(n3 + 1) / n3, seed=seed + 1, tol=tol)
    corrected = seq @ hom.values
    residual = float(np.max(np.abs(corrected[:, :, -1] - corrected[:, :, 0])))
    meta["periodicity_residuals"].append(residual)
    meta.update(method="columns", seed=seed, smooth=True, chern=list(cherns),
                surface_homotopy=_homotopy_meta(hom))
    return GaugeFrame(provider.grid, corrected[:, :, :-1], meta)


def obstruction_loop(provider, tol=DEFAULT_TOL):
    """Obstruction loop ``V_obs(k1)`` of a 2d provider, transported along ``k2``."""
    _check_provider(provider, 2)
    seq, _ = _transported_surface(provider.axis_overlaps(0), provider.axis_overlaps(1), tol)
    return UnitaryField(KGrid(provider.grid.sizes[:1]), closure_obstruction(seq, tol=tol))


def obstruction_surface(provider, method="columns", seed=0, tol=DEFAULT_TOL):
    """Obstruction surface ``V_obs(k1, k2)`` of a 3d provider, transported along ``k3``."""
    _check_provider(provider, 3)
    ov = [provider.axis_overlaps(a) for a in range(3)]
    face, _ = _surface_frame(ov[0][:, :, 0], ov[1][:, :, 0], method, seed, tol)
    seq = transport_batch(ov[2], face, tol=tol)
    return UnitaryField(KGrid(provider.grid.sizes[:2]), closure_obstruction(seq, tol=tol))


def build_frame(provider, method="columns", seed=0, tol=DEFAULT_TOL):
    """Dispatch on the grid dimension."""
    dim = provider.grid.dim
    if dim == 1:
        return frame_1d(provider, tol=tol)
    if dim == 2:
        return frame_2d(provider, method=method, seed=seed, tol=tol)
    return frame_3d(provider, method=method, seed=seed, tol=tol)


def physical_frame(provider, frame):
    """Frame vectors in the orbital basis, ``Psi(k) U(k)`` (array providers only)."""
    return provider.occ @ frame.coeffs
