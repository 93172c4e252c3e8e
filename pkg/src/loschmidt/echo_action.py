"""First-order echo action along mean-Hamiltonian trajectories.

The echo action of an initial point ``x`` is

    dS_L(x) = - int_0^t dH(xbar(tau; x)) dtau

where ``xbar`` is generated by the mean Hamiltonian.  Its gradient gives
the echo chord ``xi = J grad dS_L`` and half its Hessian, ``B_L``, gives the
amplitude weight ``w = |det(I + J B_L)|^(1/2)``.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import _time_grid, cayley_step, mat_exp, midpoint_step
from .errors import CausticEncountered
from .hamiltonians import HESS_STEP
from .phasespace import is_singular, symmetric, symplectic_form

#: Factor ``c`` in ``xi = c * J grad dS_L``; fixed by :func:`calibrate_chord`.
CHORD_FACTOR = 1.0


@dataclass(frozen=True)
class EchoLocalData:
    x: np.ndarray
    delta_action: float
    chord: np.ndarray
    b_matrix: np.ndarray
    weight: float
    err13: float
    neglected: float = float("nan")


# -- exact quadratic mean flow -------------------------------------------------

def _simpson(t, dt):
    """Nodes and composite Simpson weights on ``[0, t]`` with spacing <= dt."""
    k = max(2, 2 * int(np.ceil(t / (2.0 * dt))))
    taus = np.linspace(0.0, t, k + 1)
    w = np.full(k + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return taus, w * (t / k) / 3.0


def _augmented(H):
    n = H.a.size
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = H.generator()
    A[:n, n] = H.a
    return A


def _exact_samples(H, x, t, dt):
    """Exact flow on Simpson nodes: ``(weights, xbar[k, ..., n], M[k, n, n])``."""
    taus, w = _simpson(t, dt)
    A = _augmented(H)
    n = H.a.size
    Ms = np.empty((taus.size, n, n))
    cs = np.empty((taus.size, n))
    for k, tau in enumerate(taus):
        E = mat_exp(A, tau)
        Ms[k], cs[k] = E[:n, :n], E[:n, n]
    xbar = np.einsum("kij,...j->k...i", Ms, x) + cs.reshape((taus.size,) + (1,) * (x.ndim - 1) + (n,))
    return w, xbar, Ms


def _midpoint_pass(pair, x, t, dt, tol=1e-13, max_iter=50, grad=False, hess=False, hess_int=False):
    """Augmented implicit-midpoint integration of the echo action.

    Returns a dict with ``S`` and, on request, ``grad`` (exact gradient of
    the discrete action via the tangent map), ``hess`` (valid for quadratic
    mean only) and ``hess_int`` (``int d2 dH``).
    """
    H, dH = pair.mean, pair.delta
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    J = symplectic_form(n // 2)
    times, _ = _time_grid(t, dt)
    S = np.zeros(x.shape[:-1])
    out = {}
    if grad or hess:
        M = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
        G = np.zeros(x.shape)
        Hs = np.zeros(x.shape[:-1] + (n, n))
    if hess_int:
        K = np.zeros(x.shape[:-1] + (n, n))
    for k in range(1, times.size):
        h = times[k] - times[k - 1]
        y = midpoint_step(H, x, h, tol, max_iter, step=k)
        mid = 0.5 * (x + y)
        S -= h * dH.value(mid)
        if grad or hess or hess_int:
            d2 = dH.hessian_at(mid)
        if grad or hess:
            M_new = cayley_step(J @ H.hessian_at(mid), h) @ M
            Mm = 0.5 * (M + M_new)
            G -= h * np.einsum("...ji,...j->...i", Mm, dH.gradient(mid))
            if hess:
                Hs -= h * np.einsum("...ki,...kl,...lj->...ij", Mm, d2, Mm)
            M = M_new
        if hess_int:
            K += h * d2
        x = y
    out["S"] = S
    if grad:
        out["grad"] = G
    if hess:
        out["hess"] = Hs
    if hess_int:
        out["hess_int"] = K
    out["end"] = x
    return out


def _scheme(pair, scheme):
    if scheme == "auto":
        return "exact" if pair.mean.is_quadratic else "midpoint"
    if scheme == "exact" and not pair.mean.is_quadratic:
        raise ValueError("scheme='exact' needs a quadratic mean Hamiltonian")
    if scheme not in ("exact", "midpoint"):
        raise ValueError(f"unknown scheme {scheme!r}")
    return scheme


# -- public operations ---------------------------------------------------------

def delta_action(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """Echo action ``-int_0^t dH(xbar(tau; x)) dtau``; ``x`` may be batched.

    ``scheme='exact'`` samples the exact quadratic mean flow and applies
    composite Simpson; ``'midpoint'`` carries the integral as an extra
    component of the implicit-midpoint state.
    """
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros(x.shape[:-1])[()]
    if _scheme(pair, scheme) == "exact":
        w, xbar, _ = _exact_samples(pair.mean, x, t, dt)
        return -np.tensordot(w, pair.delta.value(xbar), axes=1)
    return _midpoint_pass(pair, x, t, dt, tol, max_iter)["S"]


def action_gradient(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """``grad dS_L = -int M(tau)^T grad dH(xbar(tau)) dtau``."""
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros_like(x)
    if _scheme(pair, scheme) == "exact":
        w, xbar, Ms = _exact_samples(pair.mean, x, t, dt)
        g = pair.delta.gradient(xbar)
        return -np.einsum("k,kji,k...j->...i", w, Ms, g)
    return _midpoint_pass(pair, x, t, dt, tol, max_iter, grad=True)["grad"]


def chord(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """Echo chord ``xi(x) = x_+(0) - x_-(0) = J grad dS_L``."""
    g = action_gradient(pair, x, t, scheme, dt, tol, max_iter)
    return CHORD_FACTOR * g @ symplectic_form(g.shape[-1] // 2).T


def drift_chord(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """``-int_0^t J grad dH(xbar(tau)) dtau``, the chord without tangent pullback.

    Equals :func:`chord` when the mean flow is a pure drift.
    """
    x = np.asarray(x, dtype=float)
    J = symplectic_form(x.shape[-1] // 2)
    if t == 0:
        return np.zeros_like(x)
    if _scheme(pair, scheme) == "exact":
        w, xbar, _ = _exact_samples(pair.mean, x, t, dt)
        return -np.tensordot(w, pair.delta.gradient(xbar), axes=1) @ J.T
    times, _ = _time_grid(t, dt)
    acc = np.zeros_like(x)
    for k in range(1, times.size):
        h = times[k] - times[k - 1]
        y = midpoint_step(pair.mean, x, h, tol, max_iter, step=k)
        acc -= h * pair.delta.gradient(0.5 * (x + y))
        x = y
    return acc @ J.T


def action_coefficients(flow_h, delta_h, t):
    """Exact quadratic form of the action for quadratic ``flow_h`` and ``delta_h``.

    Returns ``(B, g, c)`` with ``-int_0^t delta_h(x(tau)) dtau = xBx + g.x + c``
    where ``x(tau)`` is the flow of ``flow_h``.  Uses Van Loan's block
    exponential on the affine (homogeneous) generator.
    """
    n = flow_h.a.size
    A = _augmented(flow_h)
    J = symplectic_form(n // 2)
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = delta_h.hessian
    lin = -J @ delta_h.a  # delta_h = 1/2 x.Hx + lin.x
    Q[:n, n] = lin
    Q[n, :n] = lin
    m = n + 1
    C = np.zeros((2 * m, 2 * m))
    C[:m, :m] = -A.T
    C[:m, m:] = Q
    C[m:, m:] = A
    F = mat_exp(C, t)
    K = F[m:, m:].T @ F[:m, m:]
    K = 0.5 * (K + K.T)
    return -0.5 * K[:n, :n], -K[:n, n], -0.5 * K[n, n]


def hessian_delta_action(pair, x, t, method="auto", scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """``B_L = 1/2 d2 dS_L / dx2`` at a single point ``x``.

    ``method='tangent'`` integrates ``-1/2 int M^T d2dH M`` and needs a
    quadratic mean Hamiltonian; ``'fd'`` applies a central second-difference
    stencil to :func:`delta_action`.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if method == "auto":
        method = "tangent" if pair.mean.is_quadratic else "fd"
    if t == 0:
        return np.zeros((n, n))
    if method == "tangent":
        if not pair.mean.is_quadratic:
            raise ValueError("tangent Hessian requires a quadratic mean Hamiltonian")
        sch = _scheme(pair, scheme)
        if sch == "exact" and pair.delta.is_quadratic:
            return symmetric(action_coefficients(pair.mean, pair.delta, t)[0])
        if sch == "exact":
            w, xbar, Ms = _exact_samples(pair.mean, x, t, dt)
            d2 = pair.delta.hessian_at(xbar)
            return symmetric(-0.5 * np.einsum("k,kai,kab,kbj->ij", w, Ms, d2, Ms))
        return symmetric(0.5 * _midpoint_pass(pair, x, t, dt, tol, max_iter, hess=True)["hess"])
    if method != "fd":
        raise ValueError(f"unknown Hessian method {method!r}")
    pts, combine = hessian_stencil(x)
    S = delta_action(pair, pts, t, scheme, dt, tol, max_iter)
    return 0.5 * combine(S)


def hessian_stencil(x):
    """Stencil points for a central FD Hessian and the function combining values.

    The points array has shape ``x.shape[:-1] + (npts, n)``; ``combine``
    maps values of shape ``(..., npts)`` to Hessians ``(..., n, n)``.
    Step: ``eps^(1/4) * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = HESS_STEP * np.maximum(1.0, np.abs(x))
    offsets = [()]
    for i in range(n):
        offsets += [((i, 1),), ((i, -1),)]
    for i in range(n):
        for j in range(i + 1, n):
            offsets += [((i, 1), (j, 1)), ((i, 1), (j, -1)), ((i, -1), (j, 1)), ((i, -1), (j, -1))]
    pts = np.repeat(x[..., None, :], len(offsets), axis=-2)
    for k, off in enumerate(offsets):
        for i, s in off:
            pts[..., k, i] += s * h[..., i]
    hr = np.stack([(pts[..., 1 + 2 * i, i] - pts[..., 2 + 2 * i, i]) / 2.0 for i in range(n)], axis=-1)

    def combine(S):
        out = np.empty(S.shape[:-1] + (n, n))
        k = 1 + 2 * n
        for i in range(n):
            out[..., i, i] = (S[..., 1 + 2 * i] - 2.0 * S[..., 0] + S[..., 2 + 2 * i]) / hr[..., i] ** 2
        for i in range(n):
            for j in range(i + 1, n):
                v = S[..., k] - S[..., k + 1] - S[..., k + 2] + S[..., k + 3]
                out[..., i, j] = out[..., j, i] = v / (4.0 * hr[..., i] * hr[..., j])
                k += 4
        return out

    def gradient(S):
        return np.stack([(S[..., 1 + 2 * i] - S[..., 2 + 2 * i]) / (2.0 * hr[..., i]) for i in range(n)],
                        axis=-1)

    combine.gradient = gradient
    return pts, combine


def amplitude_weight(b_matrix):
    """``w = |det(I + J B_L)|^(1/2)``, i.e. ``2^L |det(I + M_L)|^(-1/2)``.

    Accepts a batch of matrices ``(..., n, n)``.
    """
    B = np.asarray(b_matrix, dtype=float)
    n = B.shape[-1]
    D = np.eye(n) + symplectic_form(n // 2) @ B
    if B.ndim == 2:
        if is_singular(D):
            raise CausticEncountered("det(I + J B_L) vanishes: echo map at a caustic")
        return float(np.sqrt(abs(np.linalg.det(D))))
    return np.sqrt(np.abs(np.linalg.det(D)))


def integrated_delta_hessian(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """``int_0^t d2 dH(xbar(tau; x)) dtau``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if t == 0:
        return np.zeros(x.shape[:-1] + (n, n))
    if pair.delta.is_quadratic:
        return np.broadcast_to(t * pair.delta.hessian, x.shape[:-1] + (n, n)).copy()
    if _scheme(pair, scheme) == "exact":
        w, xbar, _ = _exact_samples(pair.mean, x, t, dt)
        return np.tensordot(w, pair.delta.hessian_at(xbar), axes=1)
    return _midpoint_pass(pair, x, t, dt, tol, max_iter, hess_int=True)["hess_int"]


def action_error(xi, hess_int):
    """``-1/8 xi . K . xi`` for chord ``xi`` and integrated Hessian ``K`` (batched)."""
    return -0.125 * np.einsum("...i,...ij,...j->...", xi, hess_int, xi)


def dr_action_error(pair, x, t, scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """Estimated action error of evaluating the echo action along ``x_-(tau)``."""
    xi = chord(pair, x, t, scheme, dt, tol, max_iter)
    K = integrated_delta_hessian(pair, x, t, scheme, dt, tol, max_iter)
    return action_error(xi, K)[()]


def exact_echo_chord(pair, x, t):
    """Chord of the exact classical echo ``x_-(0) -> x_+(0)`` centred on ``x``.

    The echo runs forward with ``H-`` and back with ``H+``; quadratic pairs
    only.  Used to calibrate :data:`CHORD_FACTOR`.
    """
    from .dynamics import quad_flow

    x = np.asarray(x, dtype=float)
    n = x.size

    def echo(y):
        return quad_flow(pair.plus, quad_flow(pair.minus, y, t), -t)

    c = echo(np.zeros(n))
    E = np.stack([echo(e) - c for e in np.eye(n)], axis=-1)
    # midpoint of y and E y + c equals x
    y = np.linalg.solve(np.eye(n) + E, 2.0 * x - c)
    return E @ y + c - y


def calibrate_chord(pair, x, t):
    """Return the candidate factor (1 or -2) whose chord matches the exact echo.

    The comparison is meaningful for small perturbations, where the two
    candidates differ at first order while the error is second order.
    """
    exact = exact_echo_chord(pair, x, t)
    base = action_gradient(pair, x, t) @ symplectic_form(x.size // 2).T
    errs = {c: float(np.max(np.abs(c * base - exact))) for c in (1.0, -2.0)}
    return min(errs, key=errs.get), errs


def echo_local(pair, x, t, hessian="auto", scheme="auto", dt=1e-3, tol=1e-13, max_iter=50):
    """All per-point echo quantities for a single initial condition."""
    from . import quadratic_exact

    x = np.asarray(x, dtype=float)
    S = float(delta_action(pair, x, t, scheme, dt, tol, max_iter))
    xi = chord(pair, x, t, scheme, dt, tol, max_iter)
    B = hessian_delta_action(pair, x, t, hessian, scheme, dt, tol, max_iter)
    w = amplitude_weight(B)
    K = integrated_delta_hessian(pair, x, t, scheme, dt, tol, max_iter)
    neglected = float("nan")
    if pair.is_quadratic:
        neglected = quadratic_exact.sp_data(pair, x, t).neglected
    return EchoLocalData(x, S, xi, B, w, float(action_error(xi, K)), neglected)
