"""Echo estimators over time grids.

Methods
-------
``dr_minus``    phases along trajectories of ``H-`` (original dephasing form)
``dr_mean``     phases along mean-Hamiltonian trajectories, unit amplitude
``idr``         mean-Hamiltonian phases weighted by the Hessian amplitude
``quad_closed`` closed-form Gaussian average of the SP echo symbol
``grid``        split-operator quantum oracle

Averages over the Wigner function run block-wise: each block's nodes depend
only on ``(seed, block index)`` and partial sums are reduced in block order,
so results are bit-identical for any worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import echo_action as ea
from . import quadratic_exact as qe
from .dynamics import midpoint_step
from .errors import CausticEncountered, ConvergenceError, LoschmidtError
from .phasespace import CAUSTIC_RTOL, symplectic_form
from .quantum_oracle import loschmidt_series
from .states import BLOCK, quadrature_nodes, sample_block

logger = logging.getLogger(__name__)

METHODS = ("dr_minus", "dr_mean", "idr", "quad_closed", "grid")


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class GaussHermite:
    order: int = 64


@dataclass(frozen=True)
class EngineOptions:
    dt: float = 1e-3
    tol: float = 1e-13
    max_iter: int = 50
    hessian: str = "auto"
    trajectories: str = "auto"
    diagnostics: bool = True
    workers: int = 1
    oracle_N: int = 2048
    oracle_steps: Optional[int] = None
    oracle_span: Optional[tuple] = None
    oracle_dt_max: Optional[float] = None


@dataclass
class EchoSeries:
    method: str
    times: np.ndarray
    values: np.ndarray
    se_re: np.ndarray
    se_im: np.ndarray
    w_dev: np.ndarray
    err13: np.ndarray
    eta_db_eta: np.ndarray
    caustic: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def abs2(self):
        return np.abs(self.values) ** 2

    def se(self):
        return np.hypot(self.se_re, self.se_im)


def _nan(n):
    return np.full(n, np.nan)


# -- block machinery -------------------------------------------------------------

def _blocks(state, sampler):
    """Zero-argument callables returning ``(points, weights, offset)`` per block."""
    if isinstance(sampler, MonteCarlo):
        if sampler.n < 1:
            raise ValueError("sampler.n must be >= 1")
        nb = -(-sampler.n // BLOCK)

        def make(k):
            m = min(BLOCK, sampler.n - k * BLOCK)
            return lambda: (sample_block(state, sampler.seed, k)[:m], None, k * BLOCK)

        return [make(k) for k in range(nb)], float(sampler.n), True
    if isinstance(sampler, GaussHermite):
        pts, w = quadrature_nodes(state, sampler.order)
        cuts = list(range(0, len(pts), BLOCK)) + [len(pts)]
        return [(lambda a=a, b=b: (pts[a:b], w[a:b], a)) for a, b in zip(cuts[:-1], cuts[1:])], 1.0, False
    raise TypeError(f"unknown sampler {sampler!r}")


def _average(state, sampler, kernel, nt, workers):
    """Weighted averages of the kernel outputs over the Wigner function.

    ``kernel(points)`` returns ``(values (m, nt) complex, diags dict of
    (m, nt) real)``.
    """
    blocks, total, stochastic = _blocks(state, sampler)

    def run(get):
        pts, w, offset = get()
        try:
            vals, diags = kernel(pts)
        except ConvergenceError as exc:
            if exc.index is not None:
                exc.index += offset
                exc.args = (f"{exc.args[0]} (sample {exc.index})",)
            raise
        if w is None:
            w = np.ones(len(pts))
        out = {
            "v": w @ vals,
            "re2": w @ vals.real**2,
            "im2": w @ vals.imag**2,
        }
        for k, d in diags.items():
            out[k] = w @ d
        return out

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    acc = {}
    for part in parts:  # fixed block order
        for k, v in part.items():
            acc[k] = acc[k] + v if k in acc else v.copy()
    mean = acc["v"] / total
    if stochastic and total > 1:
        n = total
        var_re = np.maximum(acc["re2"] / n - mean.real**2, 0.0) * n / (n - 1)
        var_im = np.maximum(acc["im2"] / n - mean.imag**2, 0.0) * n / (n - 1)
        se_re, se_im = np.sqrt(var_re / n), np.sqrt(var_im / n)
    else:
        se_re = se_im = np.zeros(nt)
    diags = {k: v / total for k, v in acc.items() if k not in ("v", "re2", "im2")}
    return mean, se_re, se_im, diags


def _intervals(times, dt):
    """Per-interval ``(step size, count)`` landing exactly on every time."""
    out = []
    prev = 0.0
    for t in times:
        span = t - prev
        n = max(1, int(np.ceil(span / dt - 1e-9))) if span > 0 else 0
        out.append((span / n if n else 0.0, n))
        prev = t
    return out


def _record_actions(flow_h, delta_h, X, times, opts, hess_int=False):
    """Echo action at every requested time along ``flow_h`` trajectories of ``X``."""
    S = np.zeros(X.shape[:-1])
    n = X.shape[-1]
    out_S = np.empty(X.shape[:-1] + (len(times),))
    out_K = np.empty(X.shape[:-1] + (len(times), n, n)) if hess_int else None
    K = np.zeros(X.shape[:-1] + (n, n)) if hess_int else None
    x = X
    step = 0
    for j, (h, cnt) in enumerate(_intervals(times, opts.dt)):
        for _ in range(cnt):
            step += 1
            y = midpoint_step(flow_h, x, h, opts.tol, opts.max_iter, step=step)
            mid = 0.5 * (x + y)
            S = S - h * delta_h.value(mid)
            if hess_int:
                K = K + h * delta_h.hessian_at(mid)
            x = y
        out_S[..., j] = S
        if hess_int:
            out_K[..., j, :, :] = K
    return out_S, out_K


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-d array")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and sorted")
    return times


def _use_coefficients(pair, flow_h, opts):
    return opts.trajectories == "auto" and flow_h.is_quadratic and pair.delta.is_quadratic


# -- estimators -------------------------------------------------------------------

def _phase_series(state, pair, times, sampler, opts, source, amplitude):
    times = _check_times(times)
    nt = times.size
    hbar = state.hbar
    flow_h = pair.mean if source == "mean" else pair.minus
    J = symplectic_form(pair.L)
    caustic = np.zeros(nt, dtype=bool)

    if _use_coefficients(pair, flow_h, opts):
        coef = [ea.action_coefficients(flow_h, pair.delta, t) for t in times]
        w = np.ones(nt)
        sp = [None] * nt
        if amplitude:
            for j, (B, _, _) in enumerate(coef):
                if opts.hessian == "fd":
                    B = ea.hessian_delta_action(pair, state.center, times[j], "fd")
                try:
                    w[j] = ea.amplitude_weight(B)
                except CausticEncountered:
                    caustic[j] = True
                    w[j] = np.nan
            for j, t in enumerate(times):
                try:
                    sp[j] = qe.generating_variation(pair, t) if source == "mean" else None
                except LoschmidtError:
                    sp[j] = None
        dH2 = pair.delta.hessian

        def kernel(X):
            vals = np.empty((len(X), nt), dtype=complex)
            e13 = np.empty((len(X), nt))
            eta = np.full((len(X), nt), np.nan)
            for j, (B, g, c) in enumerate(coef):
                S = np.einsum("mi,ij,mj->m", X, B, X) + X @ g + c
                vals[:, j] = w[j] * np.exp(1j * S / hbar)
                xi = ea.CHORD_FACTOR * (X @ (2.0 * B) + g) @ J.T
                e13[:, j] = np.abs(ea.action_error(xi, times[j] * dH2))
                if sp[j] is not None:
                    gen, dB, da = sp[j]
                    try:
                        xb = qe.sp_mean_point(X, gen)
                        eta[:, j] = np.abs(qe.neglected_term(qe.sp_eta(xb, gen, dB, da), dB))
                    except CausticEncountered:
                        pass
            return vals, {"e13": e13, "eta": eta}

        mean, se_re, se_im, diags = _average(state, sampler, kernel, nt, opts.workers)
        return mean, se_re, se_im, np.abs(w - 1.0), diags["e13"], diags["eta"], caustic

    if amplitude and opts.hessian == "tangent" and not pair.mean.is_quadratic:
        raise ValueError("tangent Hessian requires a quadratic mean Hamiltonian")
    n = pair.L * 2

    def kernel(X):
        m = len(X)
        pts, comb = ea.hessian_stencil(X)
        # Hessian needs the full stencil, the chord diagnostic only the axis points
        used = pts.shape[1] if amplitude else (1 + 2 * n if opts.diagnostics else 1)
        try:
            S_all, _ = _record_actions(flow_h, pair.delta, pts[:, :used].reshape(-1, n), times, opts)
        except ConvergenceError as exc:
            exc.index = None if exc.index is None else exc.index // used
            raise
        S_all = np.transpose(S_all.reshape(m, used, nt), (2, 0, 1))  # (nt, m, used)
        S0 = S_all[..., 0].T
        if amplitude:
            D = np.eye(n) + J @ (0.5 * comb(S_all))
            det = np.linalg.det(D)
            scale = np.maximum(1.0, np.linalg.norm(D, 2, axis=(-2, -1))) ** n
            w = np.sqrt(np.abs(det))
            w[np.abs(det) < CAUSTIC_RTOL * scale] = np.nan
            w = w.T
        else:
            w = np.ones((m, nt))
        diags = {"wdev": np.abs(w - 1.0), "bad": np.isnan(w).astype(float)}
        if opts.diagnostics:
            pad = np.zeros(S_all.shape[:-1] + (pts.shape[1],))
            pad[..., :used] = S_all
            xi = ea.CHORD_FACTOR * np.swapaxes(comb.gradient(pad), 0, 1) @ J.T
            _, K = _record_actions(flow_h, pair.delta, X, times, opts, hess_int=True)
            diags["e13"] = np.abs(ea.action_error(xi, K))
        return w * np.exp(1j * S0 / hbar), diags

    mean, se_re, se_im, diags = _average(state, sampler, kernel, nt, opts.workers)
    caustic = diags["bad"] > 0
    if np.any(caustic):
        mean = np.where(caustic, np.nan, mean)
    return mean, se_re, se_im, diags["wdev"], diags.get("e13", _nan(nt)), _nan(nt), caustic


def estimate_dr(state, pair, times, sampler, trajectory_source="mean", options=None):
    """Unit-amplitude phase average ``<exp(i dS/hbar)>_W``."""
    opts = options or EngineOptions()
    if isinstance(sampler, MonteCarlo) and sampler.n < 100:
        raise ValueError("Monte Carlo estimators need n >= 100")
    if trajectory_source not in ("mean", "minus"):
        raise ValueError("trajectory_source must be 'mean' or 'minus'")
    mean, se_re, se_im, wdev, e13, eta, caustic = _phase_series(
        state, pair, times, sampler, opts, trajectory_source, amplitude=False)
    name = "dr_mean" if trajectory_source == "mean" else "dr_minus"
    return EchoSeries(name, np.asarray(times, float), mean, se_re, se_im, wdev, e13, eta, caustic)


def estimate_idr(state, pair, times, sampler, options=None):
    """Amplitude-weighted mean-trajectory average ``<w exp(i dS_L/hbar)>_W``."""
    opts = options or EngineOptions()
    if isinstance(sampler, MonteCarlo) and sampler.n < 100:
        raise ValueError("Monte Carlo estimators need n >= 100")
    mean, se_re, se_im, wdev, e13, eta, caustic = _phase_series(
        state, pair, times, sampler, opts, "mean", amplitude=True)
    return EchoSeries("idr", np.asarray(times, float), mean, se_re, se_im, wdev, e13, eta, caustic)


def gaussian_phase_average(state, Q, b, c):
    """``int W(x) exp(i (xQx + b.x + c) / hbar) dx`` in closed form."""
    x0, hb = state.center, state.hbar
    Z = state.G - 1j * np.asarray(Q)
    ev = np.linalg.eigvals(Z)
    if np.any(ev.real <= 0):
        raise ArithmeticError("combined quadratic form is not positive definite")
    v = 2.0 * np.asarray(Q) @ x0 + b
    phase = x0 @ Q @ x0 + b @ x0 + c
    return complex(np.prod(1.0 / np.sqrt(ev)) * np.exp(-(v @ np.linalg.solve(Z, v)) / (4.0 * hb))
                   * np.exp(1j * phase / hb))


def estimate_quadratic_closed(state, pair, times, options=None):
    """Closed-form ``int W w exp(i S^q(xbar(x))/hbar) dx`` for quadratic pairs."""
    if not pair.is_quadratic:
        raise ValueError("quad_closed needs a quadratic perturbation pair")
    times = _check_times(times)
    nt = times.size
    vals = np.full(nt, np.nan, dtype=complex)
    wdev, eta_m, e13 = _nan(nt), _nan(nt), _nan(nt)
    caustic = np.zeros(nt, dtype=bool)
    nodes = quadrature_nodes(state, 24) if state.L == 1 else None
    J = symplectic_form(pair.L)
    for j, t in enumerate(times):
        try:
            Q, b, c, (gen, dB, da) = qe.sp_quadratic_form(pair, t)
            w = ea.amplitude_weight(Q)
        except CausticEncountered:
            caustic[j] = True
            continue
        vals[j] = w * gaussian_phase_average(state, Q, b, c)
        wdev[j] = abs(w - 1.0)
        if nodes is not None:
            X, wt = nodes
            xb = qe.sp_mean_point(X, gen)
            eta_m[j] = wt @ np.abs(qe.neglected_term(qe.sp_eta(xb, gen, dB, da), dB))
            xi = ea.CHORD_FACTOR * (X @ (2.0 * Q) + b) @ J.T
            e13[j] = wt @ np.abs(ea.action_error(xi, t * pair.delta.hessian))
    z = np.zeros(nt)
    return EchoSeries("quad_closed", times, vals, z, z.copy(), wdev, e13, eta_m, caustic)


def estimate_grid(state, pair, times, options=None):
    """Quantum oracle series, wrapped as an :class:`EchoSeries`."""
    opts = options or EngineOptions()
    times = _check_times(times)
    res = loschmidt_series(state, pair.minus, pair.plus, times, N=opts.oracle_N, steps=opts.oracle_steps,
                           span=opts.oracle_span, dt_max=opts.oracle_dt_max)
    nt = times.size
    z = np.zeros(nt)
    info = {"N": res.N, "steps": res.steps, "span": [res.q_min, res.q_max], "norm_drift": res.norm_drift}
    return EchoSeries("grid", times, res.values, z, z.copy(), _nan(nt), _nan(nt), _nan(nt),
                      np.zeros(nt, dtype=bool), info)


def estimate(method, state, pair, times, sampler, options=None):
    """Dispatch on a method name from :data:`METHODS`."""
    if method == "dr_minus":
        return estimate_dr(state, pair, times, sampler, "minus", options)
    if method == "dr_mean":
        return estimate_dr(state, pair, times, sampler, "mean", options)
    if method == "idr":
        return estimate_idr(state, pair, times, sampler, options)
    if method == "quad_closed":
        return estimate_quadratic_closed(state, pair, times, options)
    if method == "grid":
        return estimate_grid(state, pair, times, options)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class ComparisonReport:
    series: dict
    differences: dict

    def max_diff(self, a, b):
        return self.differences[(a, b)]["max_abs"]


def compare(state, pair, times, methods, sampler, options=None):
    """Aligned series and pairwise absolute differences."""
    methods = list(methods)
    if len(methods) < 2:
        raise ValueError("compare needs at least two methods")
    cache = {}
    for m in methods:
        if m not in cache:
            cache[m] = estimate(m, state, pair, times, sampler, options)
    diffs = {}
    for a, b in combinations(range(len(methods)), 2):
        ma, mb = methods[a], methods[b]
        d = np.abs(cache[ma].values - cache[mb].values)
        se = np.hypot(cache[ma].se(), cache[mb].se())
        diffs[(ma, mb)] = {
            "abs": d,
            "max_abs": float(np.nanmax(d)) if np.any(np.isfinite(d)) else float("nan"),
            "mean_abs": float(np.nanmean(d)) if np.any(np.isfinite(d)) else float("nan"),
            "combined_se": se,
        }
    return ComparisonReport(cache, diffs)


def fit_exponent(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
