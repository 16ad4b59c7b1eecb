"""Independent reference computations used by the tests.

Nothing here goes through the package's transport or homotopy code; the
oracles work from raw Hamiltonians with numpy/scipy directly.
"""
import numpy as np
from scipy.stats import unitary_group


def random_unitary(n, seed):
    if n == 1:
        rng = np.random.default_rng(seed)
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(n, random_state=seed)


def occupied_vectors(model, sizes):
    axes = np.meshgrid(*[np.arange(s) / s for s in sizes], indexing="ij")
    k = np.stack(axes, axis=-1)
    _, v = np.linalg.eigh(model.hamiltonian(k))
    return v[..., :model.n_occ]


def fukui_chern(model, n):
    """Lattice Chern number from link variables on an ``n x n`` grid."""
    v = occupied_vectors(model, (n, n))

    def link(a, b):
        return np.linalg.det(np.swapaxes(a, -1, -2).conj() @ b)

    v1 = np.roll(v, -1, axis=0)
    v2 = np.roll(v, -1, axis=1)
    v12 = np.roll(v1, -1, axis=1)
    # counter-clockwise in the (k1, k2) plane
    f = np.angle(link(v, v1) * link(v1, v12) * link(v12, v2) * link(v2, v))
    return float(np.sum(f) / (2 * np.pi))


def wilson_phase(model, n):
    """Berry phase of a 1-band 1d model from the discrete Wilson loop."""
    v = occupied_vectors(model, (n,))[..., 0]
    links = np.sum(v.conj() * np.roll(v, -1, axis=0), axis=-1)
    return float(-np.angle(np.prod(links)))


def wannier_variance_1d(u):
    """Direct spread of 1d Wannier functions from a periodic frame.

    ``u`` has shape ``(n, n_orb, N)``: frame vectors in the orbital basis on
    ``k_i = i / n``. The Wannier function at cell ``R`` is the inverse
    discrete Bloch transform; all orbitals sit at the cell origin, so the
    position operator is ``R`` (lattice constant 1).
    """
    n = u.shape[0]
    w = np.fft.ifft(u, axis=0)  # w[R] = (1/n) sum_k exp(2 pi i k R) u(k)
    R = np.fft.fftfreq(n, d=1.0 / n)
    dens = np.sum(np.abs(w) ** 2, axis=1)  # (n_R, N)
    dens /= dens.sum(axis=0)
    mean = R @ dens
    return np.sum((R[:, None] - mean) ** 2 * dens, axis=0)
