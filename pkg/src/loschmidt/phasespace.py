"""Phase-space conventions and symplectic linear algebra.

Points are ordered ``x = (p_1..p_L, q_1..q_L)`` and the symplectic form is
``J = [[0, -I], [I, 0]]`` so that ``xdot = J grad H`` gives
``pdot = -dH/dq`` and ``qdot = dH/dp``.

The Cayley convention relating a symmetric generating matrix ``B`` to the
linear map ``M`` it generates is::

    J B = (I - M)(I + M)^{-1}        M = (I + J B)^{-1}(I - J B)

so that the chord of a point with center ``x`` is ``-J grad S(x)`` for
``S(x) = x B x``.  For the harmonic oscillator this reproduces
``M = exp(J H t)`` with ``B = -tan(wt/2) I``.
"""

from functools import lru_cache

import numpy as np

from .errors import CausticEncountered, DimensionError

#: Relative tolerance for caustic detection, see :func:`is_singular`.
CAUSTIC_RTOL = 1e-12

# Test hook: flipping this selects the inverse Cayley convention so that the
# calibration check in the self-test can be shown to fail.
_CAYLEY_SIGN = 1


@lru_cache(maxsize=None)
def _symplectic_form(L):
    J = np.zeros((2 * L, 2 * L))
    J[:L, L:] = -np.eye(L)
    J[L:, :L] = np.eye(L)
    J.setflags(write=False)
    return J


def symplectic_form(L):
    """Return the 2L x 2L standard symplectic matrix (read-only)."""
    if L < 1:
        raise DimensionError(f"L must be >= 1, got {L}")
    return _symplectic_form(int(L))


def dof(x):
    """Number of degrees of freedom L of a phase vector or matrix."""
    n = np.shape(x)[-1]
    if n % 2:
        raise DimensionError(f"phase-space dimension must be even, got {n}")
    return n // 2


def as_point(x, L=None):
    """Validate and return ``x`` as a float array of length 2L."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"phase point must be 1-d, got shape {x.shape}")
    n = dof(x)
    if L is not None and n != L:
        raise DimensionError(f"expected 2L={2 * L} coordinates, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("phase point has non-finite entries")
    return x


def symmetric(A):
    """Return the symmetric part of a square matrix as a float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return 0.5 * (A + A.T)


def skew_product(a, b):
    """Skew product ``a ^ b = a J b``; broadcasts over leading axes.

    For L = 1 this is ``a_q b_p - a_p b_q``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch {a.shape[-1]} vs {b.shape[-1]}")
    L = dof(a)
    ap, aq = a[..., :L], a[..., L:]
    bp, bq = b[..., :L], b[..., L:]
    # a J b = -a_p.b_q + a_q.b_p, written so that swapping a and b negates bitwise
    return np.sum(aq * bp, axis=-1) - np.sum(ap * bq, axis=-1)


def triangle_area(x, x_plus, x_minus):
    """Symplectic area of the triangle with midpoints x, x_plus, x_minus."""
    x = np.asarray(x, dtype=float)
    x_plus = np.asarray(x_plus, dtype=float)
    x_minus = np.asarray(x_minus, dtype=float)
    if not (x.shape[-1] == x_plus.shape[-1] == x_minus.shape[-1]):
        raise DimensionError("triangle vertices have different dimensions")
    return -2.0 * skew_product(x_plus - x, x_minus - x)


def is_singular(A):
    """True when ``|det A| < CAUSTIC_RTOL * max(1, ||A||)^n``."""
    A = np.asarray(A)
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    return abs(np.linalg.det(A)) < CAUSTIC_RTOL * scale**n


def symplectic_defect(M):
    """Max-abs entry of ``M^T J M - J``."""
    M = np.asarray(M, dtype=float)
    J = symplectic_form(dof(M))
    return float(np.max(np.abs(M.T @ J @ M - J)))


def cayley_b_to_m(B):
    """Linear symplectic map generated by the center matrix ``B``.

    Raises
    ------
    CausticEncountered
        If ``I + J B`` is singular.
    """
    B = symmetric(B)
    J = symplectic_form(dof(B))
    eye = np.eye(B.shape[0])
    K = _CAYLEY_SIGN * (J @ B)
    if is_singular(eye + K):
        raise CausticEncountered("I + JB is singular: map has no finite Cayley form")
    return np.linalg.solve(eye + K, eye - K)


def cayley_m_to_b(M):
    """Symmetric center matrix ``B`` with ``JB = (I - M)(I + M)^{-1}``.

    Raises
    ------
    CausticEncountered
        If ``I + M`` is singular (caustic of the center generating function).
    """
    M = np.asarray(M, dtype=float)
    J = symplectic_form(dof(M))
    eye = np.eye(M.shape[0])
    if is_singular(eye + M):
        raise CausticEncountered("I + M is singular: caustic of the center generating function")
    # (I - M)(I + M)^{-1} = solve((I + M)^T, (I - M)^T)^T
    K = np.linalg.solve((eye + M).T, (eye - M).T).T
    B = -J @ K * _CAYLEY_SIGN
    return 0.5 * (B + B.T)
