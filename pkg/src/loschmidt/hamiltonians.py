"""Hamiltonian models and the perturbation-pair algebra.

All evaluators accept batched points of shape ``(..., 2L)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError
from .phasespace import dof, skew_product, symmetric, symplectic_form

_EPS = np.finfo(float).eps
GRAD_STEP = _EPS ** (1.0 / 3.0)
HESS_STEP = _EPS ** 0.25


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H(x) = 1/2 x.hessian.x + a ^ x``."""

    hessian: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        h = symmetric(self.hessian)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        if a.size != h.shape[0] or a.size % 2:
            raise DimensionError(f"hessian {h.shape} and a {a.shape} are inconsistent")
        h.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "hessian", h)
        object.__setattr__(self, "a", a)

    @property
    def L(self):
        return self.a.size // 2

    @property
    def is_quadratic(self):
        return True

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.hessian, x) + skew_product(self.a, x)

    def gradient(self, x):
        # grad(a J x) = J^T a = -J a
        x = np.asarray(x, dtype=float)
        J = symplectic_form(self.L)
        return x @ self.hessian - J @ self.a

    def hessian_at(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.hessian, x.shape[:-1] + self.hessian.shape)

    def generator(self):
        """Matrix ``J hessian`` of the linear part of the flow."""
        return symplectic_form(self.L) @ self.hessian

    def separable_parts(self):
        """Return ``(T(p), V(q))`` callables for L = 1 when H has no pq term."""
        if self.L != 1 or self.hessian[0, 1] != 0.0:
            return None
        hpp, hqq = self.hessian[0, 0], self.hessian[1, 1]
        ap, aq = self.a
        # a ^ x = a_q p - a_p q
        return (lambda p: 0.5 * hpp * p * p + aq * p, lambda q: 0.5 * hqq * q * q - ap * q)


@dataclass(frozen=True)
class GeneralHamiltonian:
    """Callback-defined Hamiltonian.

    ``func`` maps ``(..., 2L)`` points to ``(...)`` values.  Missing
    ``grad``/``hess`` are supplied by central finite differences.  For the
    quantum oracle an L = 1 model may also expose ``kinetic(p)`` and
    ``potential(q)`` with ``H = T(p) + V(q)``.
    """

    func: Callable
    L: int = 1
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    kinetic: Optional[Callable] = None
    potential: Optional[Callable] = None
    name: str = field(default="general", compare=False)

    @property
    def is_quadratic(self):
        return False

    def value(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x, check=True):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return fd_gradient(self.func, x, check)

    def hessian_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        return fd_hessian(self.func, x)

    def separable_parts(self):
        if self.L == 1 and self.kinetic is not None and self.potential is not None:
            return self.kinetic, self.potential
        return None


def fd_gradient(f, x, check=True):
    """Central-difference gradient, step ``cbrt(eps) * max(1, |x_i|)``.

    With ``check`` a non-finite entry raises :class:`FloatingPointError`;
    otherwise it is returned as is.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.empty_like(x)
    for i in range(n):
        h = GRAD_STEP * np.maximum(1.0, np.abs(x[..., i]))
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        # use the realized step to cancel representation error in x +- h
        out[..., i] = (f(xp) - f(xm)) / (xp[..., i] - xm[..., i])
    if check and not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise FloatingPointError(f"non-finite FD gradient near point index {tuple(bad[:-1])}")
    return out


def fd_hessian(f, x):
    """Central second differences with step ``eps^(1/4) * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = HESS_STEP * np.maximum(1.0, np.abs(x))
    f0 = f(x)
    out = np.empty(x.shape + (n,))

    def shifted(*pairs):
        y = x.copy()
        for i, s in pairs:
            y[..., i] += s * h[..., i]
        return f(y)

    for i in range(n):
        out[..., i, i] = (shifted((i, 1)) - 2.0 * f0 + shifted((i, -1))) / h[..., i] ** 2
        for j in range(i + 1, n):
            v = (shifted((i, 1), (j, 1)) - shifted((i, 1), (j, -1))
                 - shifted((i, -1), (j, 1)) + shifted((i, -1), (j, -1)))
            out[..., i, j] = out[..., j, i] = v / (4.0 * h[..., i] * h[..., j])
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite FD Hessian")
    return out


def eval_quadratic(H, x):
    """Value of a quadratic Hamiltonian at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2 * H.L:
        raise DimensionError(f"point has {x.shape[-1]} coordinates, H expects {2 * H.L}")
    return H.value(x)


def hamiltonian_field(H, x):
    """Phase-space velocity ``J grad H(x)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2 * H.L:
        raise DimensionError(f"point has {x.shape[-1]} coordinates, H expects {2 * H.L}")
    J = symplectic_form(H.L)
    if H.is_quadratic:
        # J(Hx - Ja) = JHx + a
        return x @ H.generator().T + H.a
    g = H.gradient(x)
    if not np.all(np.isfinite(g)):
        bad = np.argwhere(~np.isfinite(g))[0][:-1]
        raise FloatingPointError(f"non-finite gradient at point {x[tuple(bad)]!r}")
    return g @ J.T


def as_general(H):
    """Wrap any Hamiltonian as a :class:`GeneralHamiltonian`."""
    if isinstance(H, GeneralHamiltonian):
        return H
    parts = H.separable_parts()
    return GeneralHamiltonian(
        func=H.value, L=H.L, grad=H.gradient, hess=H.hessian_at,
        kinetic=parts[0] if parts else None, potential=parts[1] if parts else None,
        name="quadratic",
    )


def combine(h1, h2, c1=1.0, c2=1.0):
    """Linear combination ``c1*h1 + c2*h2``; quadratic iff both are."""
    if h1.L != h2.L:
        raise DimensionError(f"L mismatch: {h1.L} vs {h2.L}")
    if h1.is_quadratic and h2.is_quadratic:
        return QuadraticHamiltonian(c1 * h1.hessian + c2 * h2.hessian, c1 * h1.a + c2 * h2.a)
    g1, g2 = as_general(h1), as_general(h2)
    s1, s2 = g1.separable_parts(), g2.separable_parts()
    kin = pot = None
    if s1 and s2:
        kin = lambda p: c1 * s1[0](p) + c2 * s2[0](p)  # noqa: E731
        pot = lambda q: c1 * s1[1](q) + c2 * s2[1](q)  # noqa: E731
    return GeneralHamiltonian(
        func=lambda x: c1 * g1.value(x) + c2 * g2.value(x),
        L=h1.L,
        grad=lambda x: c1 * g1.gradient(x) + c2 * g2.gradient(x),
        hess=lambda x: c1 * g1.hessian_at(x) + c2 * g2.hessian_at(x),
        kinetic=kin,
        potential=pot,
    )


@dataclass(frozen=True)
class PerturbationPair:
    """Mean Hamiltonian ``(H+ + H-)/2`` and perturbation ``H+ - H-``."""

    mean: object
    delta: object
    eps: float = float("nan")

    @property
    def L(self):
        return self.mean.L

    @property
    def is_quadratic(self):
        return self.mean.is_quadratic and self.delta.is_quadratic

    @property
    def minus(self):
        return combine(self.mean, self.delta, 1.0, -0.5)

    @property
    def plus(self):
        return combine(self.mean, self.delta, 1.0, 0.5)

    def swapped(self):
        """Pair with the roles of H+ and H- exchanged."""
        return PerturbationPair(self.mean, combine(self.delta, self.delta, -1.0, 0.0), self.eps)

    def scaled(self, c):
        """Same mean, perturbation multiplied by ``c``."""
        return PerturbationPair(self.mean, combine(self.delta, self.delta, c, 0.0), self.eps * c)


def make_pair(h_minus, h_plus, eps=float("nan")):
    """Build the (mean, delta) pair from ``H-`` and ``H+``."""
    if h_minus.is_quadratic != h_plus.is_quadratic:
        raise TypeError("h_minus and h_plus must be of the same kind")
    if h_minus.L != h_plus.L:
        raise DimensionError(f"L mismatch: {h_minus.L} vs {h_plus.L}")
    if h_minus.is_quadratic:
        mean = QuadraticHamiltonian(0.5 * (h_plus.hessian + h_minus.hessian), 0.5 * (h_plus.a + h_minus.a))
        delta = QuadraticHamiltonian(h_plus.hessian - h_minus.hessian, h_plus.a - h_minus.a)
    else:
        mean = combine(h_plus, h_minus, 0.5, 0.5)
        delta = combine(h_plus, h_minus, 1.0, -1.0)
    return PerturbationPair(mean, delta, eps)


def pair_from_reference(reference, delta, anchor="mean", eps=float("nan")):
    """Pair from a reference Hamiltonian that is either H-bar or H-.

    ``delta`` is stored as given so that no cancellation enters ``dH``.
    """
    if anchor == "mean":
        mean = reference
    elif anchor == "minus":
        mean = combine(reference, delta, 1.0, 0.5)
    else:
        raise ValueError(f"anchor must be 'mean' or 'minus', got {anchor!r}")
    if mean.is_quadratic != delta.is_quadratic:
        if mean.is_quadratic:
            mean = as_general(mean)
        else:
            delta = as_general(delta)
    return PerturbationPair(mean, delta, eps)


# -- presets -----------------------------------------------------------------

def free(L=1):
    n = 2 * L
    return QuadraticHamiltonian(np.zeros((n, n)), np.zeros(n))


def harmonic(omega=1.0):
    return QuadraticHamiltonian(omega * np.eye(2), np.zeros(2))


def inverted(omega=1.0):
    return QuadraticHamiltonian(omega * np.diag([1.0, -1.0]), np.zeros(2))


def quartic(lam=0.1):
    """``H = p^2/2 + q^2/2 + lam q^4`` (L = 1)."""

    def func(x):
        p, q = x[..., 0], x[..., 1]
        return 0.5 * p * p + 0.5 * q * q + lam * q**4

    def grad(x):
        p, q = x[..., 0], x[..., 1]
        return np.stack([p, q + 4.0 * lam * q**3], axis=-1)

    def hess(x):
        q = x[..., 1]
        out = np.zeros(x.shape + (2,))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0 + 12.0 * lam * q * q
        return out

    return GeneralHamiltonian(
        func=func, L=1, grad=grad, hess=hess,
        kinetic=lambda p: 0.5 * p * p,
        potential=lambda q: 0.5 * q * q + lam * q**4,
        name=f"quartic(lam={lam})",
    )


def squeeze_perturbation(eps, omega=1.0):
    """``dH`` whose Hessian is ``2 eps omega diag(1, -1)``."""
    return QuadraticHamiltonian(2.0 * eps * omega * np.diag([1.0, -1.0]), np.zeros(2))


def dilation_perturbation(eps, omega=1.0):
    """``dH`` whose Hessian is ``2 eps omega I``."""
    return QuadraticHamiltonian(2.0 * eps * omega * np.eye(2), np.zeros(2))


def linear_perturbation(da):
    """``dH = da ^ x``."""
    da = np.asarray(da, dtype=float)
    return QuadraticHamiltonian(np.zeros((da.size, da.size)), da)


PRESETS = {"free": free, "harmonic": harmonic, "inverted": inverted, "quartic": quartic}
