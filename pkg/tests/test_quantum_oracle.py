import numpy as np
import pytest

from loschmidt import hamiltonians as hm
from loschmidt import quantum_oracle as qo
from loschmidt import states as sts
from loschmidt.errors import GridError


def _grid(s, lo=-16.0, hi=16.0, N=1024):
    return sts.wavefunction_on_grid(s, lo, hi, N)


def test_zero_time_is_identity():
    psi = _grid(sts.coherent([0.5, 1.0]))
    assert qo.propagate(psi, hm.harmonic(), 0.0, 10) is psi
    s = sts.coherent([0.5, 1.0])
    v = qo.loschmidt_exact(s, hm.harmonic(), hm.inverted(), 0.0, N=512)
    assert abs(v - 1.0) <= 1e-12


def test_harmonic_revival():
    psi = _grid(sts.coherent([0.5, 1.0]))
    out = qo.propagate(psi, hm.harmonic(), 2 * np.pi, 4000)
    assert abs(abs(psi.inner(out)) - 1.0) <= 1e-8


def test_free_particle_momentum_density_invariant():
    psi = _grid(sts.coherent([0.8, -3.0]), -24.0, 24.0, 1024)
    out = qo.propagate(psi, hm.QuadraticHamiltonian(np.diag([1.0, 0.0]), np.zeros(2)), 2.0, 50)
    m0 = np.abs(np.fft.fft(psi.amplitudes)) ** 2
    m1 = np.abs(np.fft.fft(out.amplitudes)) ** 2
    assert np.max(np.abs(m1 - m0)) / m0.max() <= 1e-12


def test_strang_second_order():
    psi = _grid(sts.coherent([0.5, 1.0]))
    H = hm.quartic(0.1)
    ref = qo.propagate(psi, H, 1.0, 4096).amplitudes
    errs = [np.sqrt(np.sum(np.abs(qo.propagate(psi, H, 1.0, n).amplitudes - ref) ** 2) * psi.dq)
            for n in (32, 64, 128)]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, rel=0.1)


def test_norm_drift_per_thousand_steps():
    psi = _grid(sts.coherent([0.5, 1.0]))
    out = qo.propagate(psi, hm.quartic(0.1), 3.0, 1000)
    assert abs(out.norm() - psi.norm()) <= 1e-12


def test_non_separable_rejected():
    psi = _grid(sts.coherent([0.0, 0.0]))
    with pytest.raises(GridError):
        qo.propagate(psi, hm.QuadraticHamiltonian(np.array([[1.0, 0.3], [0.3, 1.0]]), np.zeros(2)), 1.0, 10)
    s2 = sts.coherent(np.zeros(4))
    with pytest.raises(GridError):
        qo.loschmidt_exact(s2, hm.free(2), hm.free(2), 1.0)


def test_aliasing_detected():
    # a coarse grid cannot hold the momentum spread of a kicked packet
    psi = _grid(sts.coherent([0.0, 0.0]), -10.0, 10.0, 64)
    with pytest.raises(GridError):
        qo.propagate(psi, hm.QuadraticHamiltonian(np.diag([0.0, 40.0]), np.zeros(2)), 1.0, 100)


def test_identical_pair_gives_one():
    s = sts.coherent([0.5, 1.0])
    H = hm.quartic(0.1)
    r = qo.loschmidt_series(s, H, H, np.linspace(0, 3, 7), N=512)
    assert np.max(np.abs(r.values - 1.0)) <= 1e-10


@pytest.mark.parametrize("pair", [
    hm.pair_from_reference(hm.harmonic(), hm.squeeze_perturbation(0.1)),
    hm.pair_from_reference(hm.inverted(), hm.dilation_perturbation(0.1)),
    hm.pair_from_reference(hm.quartic(0.1), hm.QuadraticHamiltonian(np.diag([0.0, 0.04]), np.zeros(2))),
])
def test_bounded_and_swap_conjugation(pair):
    s = sts.coherent([0.5, 1.0])
    t = np.linspace(0, 2.5, 6)
    a = qo.loschmidt_series(s, pair.minus, pair.plus, t, N=4096)
    b = qo.loschmidt_series(s, pair.plus, pair.minus, t, N=4096)
    assert np.all(np.abs(a.values) <= 1 + 1e-10)
    assert np.max(np.abs(a.values - np.conj(b.values))) <= 1e-10
    assert a.norm_drift <= 1e-12 * max(1.0, a.steps / 1000)


def test_grid_doubling():
    s = sts.coherent([0.5, 1.0])
    pair = hm.pair_from_reference(hm.harmonic(), hm.squeeze_perturbation(0.1))
    t = np.linspace(0, 3, 7)
    a = qo.loschmidt_series(s, pair.minus, pair.plus, t, N=2048)
    b = qo.loschmidt_series(s, pair.minus, pair.plus, t, N=4096, span=(a.q_min, a.q_max), steps=a.steps)
    assert np.max(np.abs(a.values - b.values)) <= 1e-8


def test_free_linear_analytic():
    da = np.array([0.2, -0.1])
    s = sts.coherent([0.5, 1.0])
    t = np.linspace(0, 3, 7)
    r = qo.loschmidt_series(s, hm.free(), hm.linear_perturbation(da), t, N=1024)
    np.testing.assert_allclose(np.abs(r.values), np.exp(-t**2 * (da @ da) / 4.0), atol=1e-6)


def test_default_span_covers_excursion():
    s = sts.coherent([0.0, 1.0])
    lo, hi = qo.default_span(s, (hm.inverted(),), 2.0)
    assert hi - 1.0 >= 4 * (np.cosh(2.0) - 1.0) - 1e-6
    # the packet itself spreads by cosh-like growth even from the origin
    lo0, hi0 = qo.default_span(sts.coherent([0.0, 0.0]), (hm.inverted(),), 2.5)
    sig = np.sqrt(0.5 * (np.cosh(2.5) ** 2 + np.sinh(2.5) ** 2))
    assert hi0 >= 10 * sig - 1e-3
    assert lo == pytest.approx(2.0 - hi)


def test_bad_times():
    s = sts.coherent([0.0, 0.0])
    with pytest.raises(ValueError):
        qo.loschmidt_series(s, hm.harmonic(), hm.harmonic(), [1.0, 0.5])
