"""Pure Gaussian states.

The Wigner function is ``W(x) = (pi hbar)^{-L} exp(-(x - x0) G (x - x0) / hbar)``
with ``G`` symmetric positive definite and ``det G = 1``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GridError
from .phasespace import as_point, symmetric

#: Samples per counter block.  Sample ``i`` always comes from block ``i // BLOCK``.
BLOCK = 4096


@dataclass(frozen=True)
class GaussianState:
    center: np.ndarray
    G: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        c = as_point(self.center)
        G = symmetric(self.G)
        if G.shape != (c.size, c.size):
            raise DimensionError(f"shape matrix {G.shape} does not match center of size {c.size}")
        if self.hbar <= 0 or not np.isfinite(self.hbar):
            raise ValueError("hbar must be positive and finite")
        if np.min(np.linalg.eigvalsh(G)) <= 0:
            raise ValueError("shape matrix must be positive definite")
        if abs(np.linalg.det(G) - 1.0) > 1e-10:
            raise ValueError(f"pure state needs det G = 1, got {np.linalg.det(G)!r}")
        c.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def L(self):
        return self.center.size // 2

    @property
    def covariance(self):
        return 0.5 * self.hbar * np.linalg.inv(self.G)


def coherent(center, hbar=1.0):
    center = as_point(center)
    return GaussianState(center, np.eye(center.size), hbar)


def squeezed(center, r, hbar=1.0):
    """L = 1 squeezed state, ``G = diag(e^{2r}, e^{-2r})`` in (p, q) order."""
    return GaussianState(as_point(center, 1), np.diag([np.exp(2 * r), np.exp(-2 * r)]), hbar)


def wigner_eval(s, x):
    x = np.asarray(x, dtype=float)
    y = x - s.center
    return (np.pi * s.hbar) ** (-s.L) * np.exp(-np.einsum("...i,ij,...j->...", y, s.G, y) / s.hbar)


def _factor(s):
    return np.linalg.cholesky(s.covariance)


def sample_block(s, seed, k):
    """Block ``k`` of the sample stream: ``BLOCK`` points.

    Each block is an independent Philox stream keyed by ``seed`` with the
    block index in the counter, so block contents depend only on
    ``(seed, k)``.
    """
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, 0, int(k)])
    z = np.random.Generator(bitgen).standard_normal((BLOCK, s.center.size))
    return s.center + z @ _factor(s).T


def sample(s, n, seed):
    """First ``n`` points of the sample stream for ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    nb = -(-n // BLOCK)
    return np.concatenate([sample_block(s, seed, k) for k in range(nb)])[:n]


def quadrature_nodes(s, order=64):
    """Tensor Gauss-Hermite nodes and weights for averages over ``W``."""
    u, w = np.polynomial.hermite.hermgauss(order)
    n = s.center.size
    grids = np.meshgrid(*([u] * n), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=-1)
    wg = np.meshgrid(*([w] * n), indexing="ij")
    W = np.prod(np.stack([g.ravel() for g in wg], axis=-1), axis=-1) / np.pi ** (n / 2)
    # z = sqrt(2) u is standard normal
    pts = s.center + np.sqrt(2.0) * U @ _factor(s).T
    return pts, W


@dataclass(frozen=True)
class GridWavefunction:
    q_min: float
    q_max: float
    N: int
    amplitudes: np.ndarray
    hbar: float = 1.0

    @property
    def dq(self):
        return (self.q_max - self.q_min) / self.N

    @property
    def q(self):
        return self.q_min + self.dq * np.arange(self.N)

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.dq)

    def inner(self, other):
        """``<self|other>`` on the shared grid."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.dq)


def wavefunction_params(s):
    """``(A, p0, q0)`` with ``psi ~ exp(-A (q-q0)^2 / (2 hbar) + i p0 (q-q0) / hbar)``."""
    if s.L != 1:
        raise DimensionError("position wavefunctions are implemented for L = 1 only")
    gpp, gpq = s.G[0, 0], s.G[0, 1]
    return (1.0 + 1j * gpq) / gpp, s.center[0], s.center[1]


def wavefunction(s, q):
    A, p0, q0 = wavefunction_params(s)
    y = np.asarray(q, dtype=float) - q0
    return (A.real / (np.pi * s.hbar)) ** 0.25 * np.exp(-A * y * y / (2 * s.hbar) + 1j * p0 * y / s.hbar)


def wavefunction_on_grid(s, q_min, q_max, N):
    """Sample the state's wavefunction on a periodic grid of ``N`` points."""
    if N < 2 or N & (N - 1):
        raise GridError(f"N must be a power of two, got {N}")
    psi = wavefunction(s, q_min + (q_max - q_min) / N * np.arange(N))
    peak = np.max(np.abs(psi)) ** 2
    edge = max(abs(psi[0]) ** 2, abs(psi[-1]) ** 2)
    if edge > 1e-12 * peak:
        raise GridError("grid too narrow: density at the edge exceeds 1e-12 of peak")
    gw = GridWavefunction(float(q_min), float(q_max), int(N), psi, s.hbar)
    # renormalize the discretization residue (1e-16 level for resolved states)
    return GridWavefunction(gw.q_min, gw.q_max, gw.N, psi / np.sqrt(gw.norm()), s.hbar)


def wigner_transform(psi_func, p, q, hbar, y_max, n=4001):
    """``(1/(pi hbar)) int psi*(q+y) psi(q-y) e^{2ipy/hbar} dy`` by trapezoid."""
    y = np.linspace(-y_max, y_max, n)
    vals = np.conj(psi_func(q + y)) * psi_func(q - y) * np.exp(2j * p * y / hbar)
    return float(np.real(np.trapezoid(vals, y))) / (np.pi * hbar)
