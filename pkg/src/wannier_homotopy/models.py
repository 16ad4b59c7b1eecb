"""Analytic tight-binding Bloch Hamiltonians.

Every model is written in the periodic Bloch convention: orbital positions
are dropped from the Bloch phases, so ``H(k + e_i) == H(k)`` holds exactly and
the quasi-periodicity operator acts trivially on coefficient vectors. Reduced
coordinates ``k`` live in ``[0, 1)^d``.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import DEFAULT_TOL
from .errors import GapClosed, InvalidParams
from .grid import KGrid
from .matcore import herm_eig

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Dirac matrices: sublattice (x) spin
GAMMA = (
    np.kron(SIGMA_X, SIGMA_0),
    np.kron(SIGMA_Z, SIGMA_0),
    np.kron(SIGMA_Y, SIGMA_X),
    np.kron(SIGMA_Y, SIGMA_Y),
    np.kron(SIGMA_Y, SIGMA_Z),
)


def gamma_pair(a, b):
    """``Gamma^{ab} = [Gamma^a, Gamma^b] / 2i`` with 1-based indices."""
    ga, gb = GAMMA[a - 1], GAMMA[b - 1]
    return (ga @ gb - gb @ ga) / 2j


@dataclass(frozen=True)
class BlochModel:
    """A periodic Hermitian Bloch Hamiltonian with ``n_occ`` occupied bands.

    ``hamiltonian`` maps an array of reduced k-points of shape ``(..., dim)``
    to Hermitian matrices of shape ``(..., n_bands, n_bands)``.
    """

    name: str
    dim: int
    n_bands: int
    n_occ: int
    hamiltonian: Callable = field(repr=False, compare=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.n_occ <= self.n_bands:
            raise InvalidParams(f"n_occ={self.n_occ} must lie in 1..{self.n_bands}")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if k.ndim == 0:
            k = k[None]
        return self.hamiltonian(k)


@dataclass(frozen=True)
class KaneMeleParams:
    lambda_nu: float
    lambda_R: float
    t: float = 1.0
    lambda_SO: float = 1.0

    def __post_init__(self):
        if not self.lambda_R < 2 * np.sqrt(3):
            raise InvalidParams(f"lambda_R={self.lambda_R} must be below 2*sqrt(3)")


@dataclass(frozen=True)
class SpectralSnapshot:
    k: np.ndarray
    eigenvalues: np.ndarray
    occ_vectors: np.ndarray
    gap: float


def kane_mele(params):
    """Four-band Kane-Mele model on the honeycomb lattice, two bands occupied.

    ``H = sum_a d_a Gamma^a + sum_{a<b} d_ab Gamma^ab`` with the coefficient
    functions of Kane and Mele (PRL 95, 146802). Their Cartesian variables
    ``x = k_x a / 2`` and ``y = sqrt(3) k_y a / 2`` are expressed through the
    reduced coordinates along the reciprocal vectors of
    ``a1 = a (1, 0)``, ``a2 = a (1/2, sqrt(3)/2)``: ``x = pi k1`` and
    ``y = 2 pi k2 - pi k1``. Shifting ``k1`` by one flips the sign of both
    ``cos`` and ``sin`` of ``x`` and ``y``, which leaves every product below
    unchanged, so the model is exactly periodic.
    """
    p = params
    g1, g2, g3, g4, _ = GAMMA
    g12, g15, g23, g24 = gamma_pair(1, 2), gamma_pair(1, 5), gamma_pair(2, 3), gamma_pair(2, 4)
    r3 = np.sqrt(3.0)

    def hamiltonian(k):
        x = np.pi * k[..., 0]
        y = 2 * np.pi * k[..., 1] - np.pi * k[..., 0]
        cx, sx, cy, sy = np.cos(x), np.sin(x), np.cos(y), np.sin(y)
        coeffs = (
            (p.t * (1 + 2 * cx * cy), g1),
            (np.full_like(x, p.lambda_nu), g2),
            (p.lambda_R * (1 - cx * cy), g3),
            (-r3 * p.lambda_R * sx * sy, g4),
            (-2 * p.t * cx * sy, g12),
            (p.lambda_SO * (2 * np.sin(2 * x) - 4 * sx * cy), g15),
            (-p.lambda_R * cx * sy, g23),
            (r3 * p.lambda_R * sx * cy, g24),
        )
        return sum(c[..., None, None] * g for c, g in coeffs)

    return BlochModel(
        name="kane-mele",
        dim=2,
        n_bands=4,
        n_occ=2,
        hamiltonian=hamiltonian,
        params={"lambda_nu": p.lambda_nu, "lambda_R": p.lambda_R, "t": p.t, "lambda_SO": p.lambda_SO},
    )


def kane_mele_coefficients(h):
    """Recover ``(d_a, d_ab)`` from Kane-Mele matrices by tracing against the Gammas.

    Returns two dicts keyed by ``a`` and ``(a, b)``.
    """
    d_a = {a: np.real(np.einsum("...ij,ji->...", h, GAMMA[a - 1])) / 4 for a in range(1, 6)}
    d_ab = {
        (a, b): np.real(np.einsum("...ij,ji->...", h, gamma_pair(a, b))) / 4
        for a in range(1, 6)
        for b in range(a + 1, 6)
    }
    return d_a, d_ab


def haldane(t1=1.0, t2=0.2, phi=-np.pi / 2, mass=0.0):
    """Two-band Haldane model, one band occupied.

    Next-nearest-neighbour hoppings carry phase ``+phi`` on sublattice A and
    ``-phi`` on sublattice B along the same three Bravais vectors. The
    defaults put the model deep in a Chern phase with a gap of about 2.
    """
    nnn = np.array([[1, 0], [0, -1], [-1, 1]], dtype=float)

    def hamiltonian(k):
        arg = 2 * np.pi * np.einsum("...i,ji->...j", k, nnn)
        h_ab = t1 * (1 + np.exp(-2j * np.pi * k[..., 0]) + np.exp(-2j * np.pi * k[..., 1]))
        d0 = 2 * t2 * np.cos(phi) * np.cos(arg).sum(-1)
        dz = mass - 2 * t2 * np.sin(phi) * np.sin(arg).sum(-1)
        h = np.empty(k.shape[:-1] + (2, 2), dtype=complex)
        h[..., 0, 0] = d0 + dz
        h[..., 1, 1] = d0 - dz
        h[..., 0, 1] = h_ab
        h[..., 1, 0] = np.conj(h_ab)
        return h

    return BlochModel(
        name="haldane",
        dim=2,
        n_bands=2,
        n_occ=1,
        hamiltonian=hamiltonian,
        params={"t1": t1, "t2": t2, "phi": phi, "mass": mass},
    )


def haldane_chern():
    """Haldane model at its default parameters (Chern number 1)."""
    return haldane()


def berry_loop(theta=np.pi / 3):
    """One-dimensional two-level model ``H(k) = -n(k).sigma``, lowest band occupied.

    ``n(k)`` sweeps a cone of half-angle ``theta`` around z, so the occupied
    state is ``(cos(theta/2), exp(2 pi i k) sin(theta/2))`` and its Berry
    phase over a period is ``-2 pi sin^2(theta/2)``.
    """
    st, ct = np.sin(theta), np.cos(theta)

    def hamiltonian(k):
        ph = 2 * np.pi * k[..., 0]
        n = (st * np.cos(ph), st * np.sin(ph), np.full_like(ph, ct))
        return -sum(c[..., None, None] * s for c, s in zip(n, (SIGMA_X, SIGMA_Y, SIGMA_Z)))

    return BlochModel(name="berry-loop", dim=1, n_bands=2, n_occ=1, hamiltonian=hamiltonian,
                      params={"theta": theta})


def berry_phase_exact(theta, n):
    """Discrete Berry phase of :func:`berry_loop` on an ``n``-point loop.

    Every neighbouring overlap equals ``cos^2 + sin^2 exp(2 pi i / n)``.
    """
    c2, s2 = np.cos(theta / 2) ** 2, np.sin(theta / 2) ** 2
    return -n * np.angle(c2 + s2 * np.exp(2j * np.pi / n))


def broadcast_model(model, dim, axis=0):
    """Embed a 1d model in ``dim`` dimensions, depending only on ``k[axis]``."""
    if model.dim != 1:
        raise InvalidParams("only 1d models can be broadcast")

    def hamiltonian(k):
        return model.hamiltonian(k[..., axis:axis + 1])

    return BlochModel(name=f"{model.name}-{dim}d", dim=dim, n_bands=model.n_bands,
                      n_occ=model.n_occ, hamiltonian=hamiltonian,
                      params=dict(model.params, broadcast_axis=axis))


def constant_model(h0, n_occ, dim=1, name="constant"):
    h0 = np.asarray(h0, dtype=complex)

    def hamiltonian(k):
        return np.broadcast_to(h0, k.shape[:-1] + h0.shape).copy()

    return BlochModel(name=name, dim=dim, n_bands=h0.shape[0], n_occ=n_occ, hamiltonian=hamiltonian)


def random_tight_binding(dim, n_bands, n_occ, seed=0, hopping=0.15, splitting=2.0):
    """Random nearest-neighbour model adiabatically connected to an atomic limit.

    On-site energies are ``-splitting`` for the ``n_occ`` lowest orbitals and
    ``+splitting`` for the rest. Hoppings along each axis are complex Gaussian
    matrices scaled by ``hopping``; with the defaults the hopping norm is well
    below the splitting, so the gap never closes and every Chern number is 0.
    """
    rng = np.random.default_rng(seed)
    onsite = np.diag([-splitting] * n_occ + [splitting] * (n_bands - n_occ)).astype(complex)
    hops = hopping * (rng.standard_normal((dim, n_bands, n_bands))
                      + 1j * rng.standard_normal((dim, n_bands, n_bands))) / np.sqrt(2 * n_bands)

    def hamiltonian(k):
        h = np.broadcast_to(onsite, k.shape[:-1] + onsite.shape).astype(complex)
        for i in range(dim):
            ph = np.exp(2j * np.pi * k[..., i])[..., None, None]
            term = ph * hops[i]
            h = h + term + np.swapaxes(term, -1, -2).conj()
        return h

    return BlochModel(name="random-tb", dim=dim, n_bands=n_bands, n_occ=n_occ,
                      hamiltonian=hamiltonian,
                      params={"seed": seed, "hopping": hopping, "splitting": splitting})


def toy_diag_loop(winding, n_points=64, N=None):
    """Diagonal loop ``V(k) = diag(exp(2 pi i w_j k))`` sampled on ``n_points``."""
    from .homotopy import UnitaryField

    winding = [int(w) for w in winding]
    if N is not None and N != len(winding):
        raise InvalidParams(f"winding list has {len(winding)} entries, expected {N}")
    grid = KGrid((n_points,))
    k = grid.axis(0)
    phases = np.exp(2j * np.pi * np.outer(k, winding))
    values = np.zeros((n_points, len(winding), len(winding)), dtype=complex)
    idx = np.arange(len(winding))
    values[:, idx, idx] = phases
    return UnitaryField(grid, values)


def spectral_snapshot(model, k, tol=DEFAULT_TOL):
    """Eigen-decomposition at one k-point with the occupied block and the gap."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    eig = herm_eig(model(k), tol=tol)
    n = model.n_occ
    gap = np.inf if n == model.n_bands else float(eig.eigenvalues[n] - eig.eigenvalues[n - 1])
    if gap < tol.gap:
        raise GapClosed(gap, tuple(k))
    return SpectralSnapshot(k, eig.eigenvalues, eig.eigenvectors[:, :n], gap)


def sample_grid(model, grid, tol=DEFAULT_TOL):
    """Occupied eigenvectors and band energies on every grid point.

    Returns ``(occ, energies, gaps)`` with shapes ``sizes + (n_bands, n_occ)``,
    ``sizes + (n_bands,)`` and ``sizes``. Raises :class:`GapClosed` at the
    point of smallest gap if it is below tolerance.
    """
    h = model(grid.coords())
    eig = herm_eig(h, tol=tol)
    n = model.n_occ
    if n == model.n_bands:
        gaps = np.full(grid.shape, np.inf)
    else:
        gaps = eig.eigenvalues[..., n] - eig.eigenvalues[..., n - 1]
    worst = np.unravel_index(np.argmin(gaps), gaps.shape)
    if gaps[worst] < tol.gap:
        raise GapClosed(gaps[worst], tuple(grid.coords()[worst]))
    return eig.eigenvectors[..., :n], eig.eigenvalues, gaps


def min_gap(model, grid, chunk=4096):
    """Smallest direct gap between bands ``n_occ`` and ``n_occ + 1`` on a grid."""
    k = grid.coords().reshape(-1, grid.dim)
    n = model.n_occ
    best = np.inf
    for start in range(0, len(k), chunk):
        e = np.linalg.eigvalsh(model(k[start:start + chunk]))
        best = min(best, float(np.min(e[:, n] - e[:, n - 1])))
    return best


def trs_operator(n_bands, kind):
    """Unitary part of the time-reversal operator; spin is the last tensor factor."""
    if kind == "bosonic":
        return np.eye(n_bands, dtype=complex)
    if kind == "fermionic":
        if n_bands % 2:
            raise InvalidParams("fermionic time reversal needs an even number of bands")
        return np.kron(np.eye(n_bands // 2), 1j * SIGMA_Y)
    raise InvalidParams(f"unknown time-reversal kind {kind!r}")


def check_trs(model, kind="fermionic", samples=64, seed=0):
    """Largest ``||H(-k) - theta H(k) theta^-1||_F`` over random k-points."""
    u = trs_operator(model.n_bands, kind)
    rng = np.random.default_rng(seed)
    k = rng.random((samples, model.dim))
    h = model(k)
    h_minus = model(-k)
    transformed = u @ h.conj() @ u.conj().T
    return float(np.max(np.linalg.norm(h_minus - transformed, axis=(-2, -1))))
