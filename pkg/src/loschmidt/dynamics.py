"""Classical propagation: exact quadratic flow, implicit midpoint, tangents."""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, MatrixOverflow, UnsupportedDegenerate
from .hamiltonians import hamiltonian_field
from .phasespace import symplectic_form

# Pade(13) coefficients and the theta_13 bound of Higham (2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def mat_exp(A, t=1.0):
    """``exp(A t)`` by scaling and squaring with the [13/13] Pade approximant."""
    A = np.asarray(A) * t
    n = A.shape[0]
    eye = np.eye(n, dtype=A.dtype)
    if not np.any(A):
        return eye
    norm = np.linalg.norm(A, 1)
    if not np.isfinite(norm):
        raise MatrixOverflow("matrix has non-finite entries")
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
        A = A / 2.0**s
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye
    R = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            R = R @ R
    if not np.all(np.isfinite(R)):
        raise MatrixOverflow(f"exp(At) overflowed (||At||_1 = {norm:.3g})")
    return R


def _affine_offset(H, t):
    """``c(t)`` with ``x(t) = exp(JHt) x0 + c(t)``, via the augmented generator."""
    n = H.a.size
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = H.generator()
    A[:n, n] = H.a
    return mat_exp(A, t)[:n, n]


def _check_degenerate(H):
    if not np.any(H.a):
        return
    if not np.any(H.hessian):
        return
    A = H.generator()
    # a must be in range(JH) for a stationary point to exist
    sol, *_ = np.linalg.lstsq(A, H.a, rcond=None)
    if np.linalg.matrix_rank(A) < A.shape[0] and not np.allclose(A @ sol, H.a, atol=1e-12):
        raise UnsupportedDegenerate("singular Hessian with linear term outside range(JH)")


def quad_flow(H, x0, t):
    """Exact affine flow ``exp(JHt) x0 + (exp(JHt) - I)(JH)^{-1} a``.

    ``x0`` may be batched (``(..., 2L)``).  The ``H = 0`` branch is the drift
    ``x0 + t a``.
    """
    _check_degenerate(H)
    x0 = np.asarray(x0, dtype=float)
    if not np.any(H.hessian):
        return x0 + t * H.a
    M = mat_exp(H.generator(), t)
    out = x0 @ M.T
    if np.any(H.a):
        out = out + _affine_offset(H, t)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Points of a trajectory on a uniform time grid."""

    times: np.ndarray
    points: np.ndarray
    hamiltonian: object
    partial_step: bool = False

    @property
    def dt(self):
        return self.times[1] - self.times[0] if self.times.size > 1 else 0.0


@dataclass(frozen=True)
class TangentFlow:
    times: np.ndarray
    monodromy: np.ndarray  # (n_times, 2L, 2L)


def _time_grid(t, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    n = int(np.floor(t / dt + 1e-9))
    times = dt * np.arange(n + 1)
    partial = t - times[-1] > 1e-12 * max(1.0, t)
    if partial:
        times = np.append(times, t)
    return times, partial


def _field(H, x):
    # raw field: non-finite values are diagnosed by the caller per point
    if H.is_quadratic:
        return hamiltonian_field(H, x)
    return H.gradient(x, check=False) @ symplectic_form(H.L).T


def midpoint_step(H, x, h, tol=1e-13, max_iter=50, step=None):
    """One implicit-midpoint step of size ``h`` on (batched) points ``x``.

    On failure the raised :class:`ConvergenceError` carries the flat index of
    the worst point in ``x``.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        y = x + h * _field(H, x)
        for _ in range(max_iter):
            y_new = x + h * _field(H, 0.5 * (x + y))
            err = np.max(np.abs(y_new - y)) if y.size else 0.0
            y = y_new
            if not np.isfinite(err):
                break
            if err <= tol * max(1.0, float(np.max(np.abs(y))) if y.size else 1.0):
                break
        else:
            res = np.abs(x + h * _field(H, 0.5 * (x + y)) - y)
            raise ConvergenceError(f"midpoint iteration did not converge at step {step} (residual {err:.3g})",
                                   step=step, index=_worst(res))
    if not np.all(np.isfinite(y)):
        raise ConvergenceError(f"trajectory diverged at step {step}", step=step,
                               index=_worst(np.where(np.isfinite(y), 0.0, np.inf)))
    return y


def _worst(r):
    if r.ndim < 2:
        return None
    return int(np.argmax(np.nan_to_num(r.reshape(-1, r.shape[-1]), nan=np.inf).max(axis=-1)))


def integrate_trajectory(H, x0, t, dt, tol=1e-13, max_iter=50):
    """Implicit-midpoint trajectory of ``H`` from ``x0`` over ``[0, t]``.

    If ``t`` is not a multiple of ``dt`` a shorter final step lands exactly on
    ``t`` and ``partial_step`` is set.
    """
    x0 = np.asarray(x0, dtype=float)
    times, partial = _time_grid(t, dt)
    pts = np.empty((times.size,) + x0.shape)
    pts[0] = x0
    for k in range(1, times.size):
        pts[k] = midpoint_step(H, pts[k - 1], times[k] - times[k - 1], tol, max_iter, step=k)
    return Trajectory(times, pts, H, partial)


def cayley_step(A, h):
    """Tangent map of one midpoint step, ``(I - hA/2)^{-1}(I + hA/2)``.

    ``A`` may be batched ``(..., n, n)``.
    """
    eye = np.eye(A.shape[-1])
    return np.linalg.solve(eye - 0.5 * h * A, eye + 0.5 * h * A)


def integrate_tangent(H, traj):
    """Monodromy matrices along a trajectory from :func:`integrate_trajectory`.

    Uses the exact linearization of the midpoint map, so every ``M`` is
    symplectic to rounding.
    """
    J = symplectic_form(H.L)
    pts = traj.points
    n = pts.shape[-1]
    Ms = np.empty((traj.times.size,) + pts.shape[1:-1] + (n, n))
    Ms[0] = np.eye(n)
    for k in range(1, traj.times.size):
        h = traj.times[k] - traj.times[k - 1]
        A = J @ H.hessian_at(0.5 * (pts[k - 1] + pts[k]))
        Ms[k] = cayley_step(A, h) @ Ms[k - 1]
    return TangentFlow(traj.times, Ms)
