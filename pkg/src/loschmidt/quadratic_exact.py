"""Exact quadratic-Hamiltonian machinery.

Center generating functions ``S^t(x) = x B x + alpha ^ x``, their first-order
variations under a perturbation, the stationary-phase (SP) reduction of the
echo symbol and closed-form reference actions.

Sign conventions follow :mod:`loschmidt.phasespace`.  With them the mean
point of the SP reduction is ``xbar = (I + J Bbar)^{-1} (x - alphabar/2)``,
the center of the mean map that starts at ``x``.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import _check_degenerate, mat_exp
from .echo_action import amplitude_weight
from .errors import CausticEncountered, UnsupportedDegenerate
from .phasespace import is_singular, skew_product, symmetric, symplectic_form


@dataclass(frozen=True)
class CenterGenerating:
    B: np.ndarray
    alpha: np.ndarray
    t: float
    hamiltonian: object = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.B, x) + skew_product(self.alpha, x)


@dataclass(frozen=True)
class SpData:
    x_bar: np.ndarray
    eta: np.ndarray
    s_q: float
    weight: float
    neglected: float


def _cayley_pieces(H, t):
    n = H.a.size
    eye = np.eye(n)
    M = mat_exp(H.generator(), t)
    if is_singular(eye + M):
        raise CausticEncountered(f"det(I + exp(JHt)) vanishes at t={t}")
    return M, eye


def center_generating(H, t):
    """``B^t`` and ``alpha^t`` with ``JB = (I - e^{JHt})(I + e^{JHt})^{-1}``.

    ``alpha = 2 J B (JH)^{-1} a``; for ``H = 0`` the function reduces to
    ``-t a ^ x`` (``B = 0``, ``alpha = -t a``).
    """
    n = H.a.size
    J = symplectic_form(n // 2)
    if not np.any(H.hessian):
        return CenterGenerating(np.zeros((n, n)), -t * H.a, t, H)
    _check_degenerate(H)
    M, eye = _cayley_pieces(H, t)
    K = np.linalg.solve((eye + M).T, (eye - M).T).T
    B = symmetric(-J @ K)
    if np.any(H.a):
        if is_singular(H.generator()):
            raise UnsupportedDegenerate("alpha^t needs a nonsingular Hessian when a != 0")
        alpha = 2.0 * J @ B @ np.linalg.solve(H.generator(), H.a)
    else:
        alpha = np.zeros(n)
    return CenterGenerating(B, alpha, t, H)


def generating_variation(pair, t):
    """Mean generating function and its first-order variation.

    Returns ``(mean_gen, dB, dalpha)`` where ``dB`` and ``dalpha`` are the
    directional derivatives of ``B^t`` and ``alpha^t`` at the mean
    Hamiltonian in the direction of the perturbation.
    """
    Hm, dH = pair.mean, pair.delta
    n = Hm.a.size
    J = symplectic_form(n // 2)
    eye = np.eye(n)
    gen = center_generating(Hm, t)
    if not np.any(Hm.hessian):
        # JB = -tanh(JHt/2) linearizes to -J dH t/2 at H = 0
        dB = -0.5 * t * dH.hessian
        return gen, symmetric(dB), -t * dH.a
    A = Hm.generator()
    E = J @ dH.hessian
    # Frechet derivative of exp(At) along E t from the block-triangular exponential
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = A
    blk[:n, n:] = E
    blk[n:, n:] = A
    F = mat_exp(blk, t)
    M, dM = F[:n, :n], F[:n, n:]
    if is_singular(eye + M):
        raise CausticEncountered(f"det(I + exp(JHt)) vanishes at t={t}")
    inv = np.linalg.inv(eye + M)
    K = J @ gen.B
    dK = -(eye + K) @ dM @ inv
    dB = symmetric(-J @ dK)
    if np.any(Hm.a) or np.any(dH.a):
        if is_singular(A):
            raise UnsupportedDegenerate("alpha variation needs a nonsingular mean Hessian")
        Ainv = np.linalg.inv(A)
        da = (2.0 * J @ dB @ Ainv @ Hm.a
              - 2.0 * J @ gen.B @ Ainv @ E @ Ainv @ Hm.a
              + 2.0 * J @ gen.B @ Ainv @ dH.a)
    else:
        da = np.zeros(n)
    return gen, dB, da


def sp_mean_point(x, mean_gen):
    """Center ``xbar = (I + J Bbar)^{-1} (x - alphabar/2)`` of the mean map from ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    D = np.eye(n) + symplectic_form(n // 2) @ mean_gen.B
    if is_singular(D):
        raise CausticEncountered("I + J Bbar is singular")
    return np.linalg.solve(D, (x - 0.5 * mean_gen.alpha).T).T


def sp_eta(x_bar, mean_gen, dB, dAlpha):
    """Half-chord ``eta = (J - Bbar)^{-1} (2 dB xbar + J dalpha) / 4``."""
    x_bar = np.asarray(x_bar, dtype=float)
    n = x_bar.shape[-1]
    J = symplectic_form(n // 2)
    D = J - mean_gen.B
    if is_singular(D):
        raise CausticEncountered("J - Bbar is singular")
    rhs = (2.0 * x_bar @ np.asarray(dB).T + J @ np.asarray(dAlpha)) / 4.0
    return np.linalg.solve(D, rhs.T).T


def sp_phase(x_bar, dB, dAlpha):
    """``S^q = xbar dB xbar + dalpha ^ xbar``."""
    x_bar = np.asarray(x_bar, dtype=float)
    return np.einsum("...i,ij,...j->...", x_bar, dB, x_bar) + skew_product(dAlpha, x_bar)


def neglected_term(eta, dB):
    """``eta dB eta``, the third-order term dropped by the SP reduction."""
    eta = np.asarray(eta, dtype=float)
    return np.einsum("...i,ij,...j->...", eta, dB, eta)


def sp_quadratic_form(pair, t):
    """``S^q(xbar(x)) = x Q x + b.x + c`` as ``(Q, b, c)`` plus the SP pieces."""
    gen, dB, da = generating_variation(pair, t)
    n = dB.shape[0]
    J = symplectic_form(n // 2)
    D = np.eye(n) + J @ gen.B
    if is_singular(D):
        raise CausticEncountered("I + J Bbar is singular")
    P = np.linalg.inv(D)
    s = -0.5 * P @ gen.alpha  # xbar = P x + s
    Q = symmetric(P.T @ dB @ P)
    lin = -J @ da  # dalpha ^ y = lin . y
    b = 2.0 * P.T @ dB @ s + P.T @ lin
    c = float(s @ dB @ s + lin @ s)
    return Q, b, c, (gen, dB, da)


def sp_data(pair, x, t):
    """SP quantities at a single point ``x``."""
    Q, _, _, (gen, dB, da) = sp_quadratic_form(pair, t)
    xb = sp_mean_point(x, gen)
    eta = sp_eta(xb, gen, dB, da)
    return SpData(xb, eta, float(sp_phase(xb, dB, da)), amplitude_weight(Q), float(neglected_term(eta, dB)))


def delta_action_linear(H, dA, x, t):
    """Exact echo action for ``dH = dA ^ x`` and quadratic mean ``H``.

    ``dS_L = dA ^ (JH)^{-1} [ (I - e^{JHt})(x + (JH)^{-1} a) + t a ]``, and
    for ``H = 0``: ``-t dA ^ (x + t a / 2)``.
    """
    x = np.asarray(x, dtype=float)
    dA = np.asarray(dA, dtype=float)
    if not np.any(H.hessian):
        return -t * skew_product(dA, x + 0.5 * t * H.a)
    A = H.generator()
    if is_singular(A):
        raise UnsupportedDegenerate("closed form needs a nonsingular Hessian or H = 0")
    Ainv = np.linalg.inv(A)
    M = mat_exp(A, t)
    eye = np.eye(A.shape[0])
    y = (x + Ainv @ H.a) @ (eye - M).T + t * H.a
    return skew_product(dA, y @ Ainv.T)


def reference_actions(preset, omega, eps, t, x):
    """Closed-form echo actions of the two oscillator examples (L = 1).

    ``'ho'``:       (eps/2)(q^2 - p^2) sin(2wt) + 2 eps p q sin^2(wt)
    ``'inverted'``: -(eps/2)(q^2 + p^2) sinh(2wt) - 2 eps p q sinh^2(wt)
    """
    x = np.asarray(x, dtype=float)
    p, q = x[..., 0], x[..., 1]
    wt = omega * t
    if preset == "ho":
        return 0.5 * eps * (q * q - p * p) * np.sin(2 * wt) + 2 * eps * p * q * np.sin(wt) ** 2
    if preset == "inverted":
        return -0.5 * eps * (q * q + p * p) * np.sinh(2 * wt) - 2 * eps * p * q * np.sinh(wt) ** 2
    raise ValueError(f"unknown preset {preset!r}")


def echo_map(pair, t):
    """Linear part ``M_-^{-1} M_+`` of the exact quadratic echo map."""
    Mm = mat_exp(pair.minus.generator(), t)
    Mp = mat_exp(pair.plus.generator(), t)
    return np.linalg.solve(Mm, Mp)
