"""Invariant checks behind ``loschmidt selftest``.

Each check returns ``(passed, detail)``.  The report contains no timings,
so two runs print identical tables.
"""

import numpy as np

from . import echo_action as ea
from . import engine as en
from . import hamiltonians as hm
from . import phasespace as ps
from .dynamics import integrate_tangent, integrate_trajectory, mat_exp
from .quantum_oracle import loschmidt_series, propagate
from .states import coherent, wavefunction_on_grid


def _rng():
    return np.random.default_rng(20240607)


def check_cayley_round_trip():
    rng = _rng()
    worst = 0.0
    for _ in range(20):
        C = rng.standard_normal((2, 2))
        B = 0.3 * (C + C.T)
        worst = max(worst, float(np.max(np.abs(ps.cayley_m_to_b(ps.cayley_b_to_m(B)) - B))))
    return worst <= 1e-12, f"max |B - B'| = {worst:.2e}"


def check_cayley_calibration():
    """The center matrix must generate the exact flow: ``x+ - x- = -J grad S``."""
    H = hm.harmonic(1.0)
    J = ps.symplectic_form(1)
    rng = _rng()
    worst = 0.0
    for t in (0.3, 0.9, 1.7):
        M = mat_exp(H.generator(), t)
        B = ps.cayley_m_to_b(M)
        xm = rng.standard_normal((8, 2))
        xp = xm @ M.T
        xc = 0.5 * (xp + xm)
        chord = -(xc @ (2.0 * B)) @ J.T
        worst = max(worst, float(np.max(np.abs((xp - xm) - chord))))
    return worst <= 1e-12, f"max chord mismatch = {worst:.2e}"


def check_symplecticity():
    H = hm.quartic(0.1)
    tr = integrate_trajectory(H, [0.3, 1.2], 5.0, 1e-2)
    M = integrate_tangent(H, tr).monodromy
    d = max(ps.symplectic_defect(m) for m in M)
    return d <= 1e-8, f"max ||M^T J M - J|| = {d:.2e}"


def check_gradient_fd():
    pair = hm.pair_from_reference(hm.harmonic(), hm.squeeze_perturbation(0.1))
    x = np.array([0.7, -0.4])
    g = ea.action_gradient(pair, x, 1.1)
    gf = hm.fd_gradient(lambda y: ea.delta_action(pair, y, 1.1), x)
    err = float(np.max(np.abs(g - gf)))
    return err <= 1e-7, f"max |grad - FD| = {err:.2e}"


def check_hessian_fd():
    pair = hm.pair_from_reference(hm.inverted(), hm.dilation_perturbation(0.05))
    x = np.array([0.2, 0.5])
    Bt = ea.hessian_delta_action(pair, x, 1.3, "tangent")
    Bf = ea.hessian_delta_action(pair, x, 1.3, "fd")
    err = float(np.max(np.abs(Bt - Bf)))
    return err <= 1e-6, f"max |B_tangent - B_FD| = {err:.2e}"


def check_unitarity():
    s = coherent([0.5, 1.0])
    psi = wavefunction_on_grid(s, -20.0, 20.0, 1024)
    out = propagate(psi, hm.quartic(0.1), 2.0, 1000)
    drift = abs(out.norm() - psi.norm())
    return drift <= 1e-12, f"norm drift over 1000 steps = {drift:.2e}"


def check_initial_value():
    s = coherent([0.5, 1.0])
    pair = hm.pair_from_reference(hm.harmonic(), hm.squeeze_perturbation(0.1))
    vals = [en.estimate(m, s, pair, [0.0], en.MonteCarlo(1000, 3)).values[0]
            for m in ("dr_minus", "dr_mean", "idr", "quad_closed")]
    vals.append(loschmidt_series(s, pair.minus, pair.plus, [0.0], N=512).values[0])
    err = max(abs(v - 1.0) for v in vals)
    return err <= 1e-12, f"max |L(0) - 1| = {err:.2e}"


def check_swap():
    s = coherent([0.3, -0.6])
    pair = hm.pair_from_reference(hm.quartic(0.1), hm.QuadraticHamiltonian(np.diag([0.0, 0.02]), np.zeros(2)))
    opts = en.EngineOptions(dt=2e-2)
    a = en.estimate_idr(s, pair, [0.5, 1.0], en.MonteCarlo(300, 4), opts).values
    b = en.estimate_idr(s, pair.swapped(), [0.5, 1.0], en.MonteCarlo(300, 4), opts).values
    err = float(np.max(np.abs(a - np.conj(b))))
    return err <= 1e-10, f"max |L - conj(L_swapped)| = {err:.2e}"


def check_determinism():
    s = coherent([0.5, 1.0])
    pair = hm.pair_from_reference(hm.harmonic(), hm.squeeze_perturbation(0.1))
    sampler = en.MonteCarlo(3 * 4096 + 17, 11)
    a = en.estimate_idr(s, pair, np.linspace(0, 2, 5), sampler, en.EngineOptions(workers=1))
    b = en.estimate_idr(s, pair, np.linspace(0, 2, 5), sampler, en.EngineOptions(workers=3))
    same = a.values.tobytes() == b.values.tobytes() and a.se_re.tobytes() == b.se_re.tobytes()
    return same, "bit-identical across worker counts" if same else "outputs differ across worker counts"


CHECKS = [
    ("cayley_round_trip", check_cayley_round_trip),
    ("cayley_calibration", check_cayley_calibration),
    ("symplecticity", check_symplecticity),
    ("gradient_fd", check_gradient_fd),
    ("hessian_fd", check_hessian_fd),
    ("unitarity", check_unitarity),
    ("initial_value", check_initial_value),
    ("swap_conjugation", check_swap),
    ("determinism", check_determinism),
]


def run(inject_flip=False):
    """Run every check; returns a list of ``(name, passed, detail)``."""
    saved = ps._CAYLEY_SIGN
    if inject_flip:
        ps._CAYLEY_SIGN = -saved
    try:
        rows = []
        for name, fn in CHECKS:
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            rows.append((name, bool(ok), detail))
        return rows
    finally:
        ps._CAYLEY_SIGN = saved


def format_report(rows):
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}" for name, ok, detail in rows]
    n_ok = sum(r[1] for r in rows)
    lines.append(f"{n_ok}/{len(rows)} checks passed")
    return "\n".join(lines)
