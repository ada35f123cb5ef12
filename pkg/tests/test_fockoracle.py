import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subplanck import core, fockoracle, hypercube
from subplanck.core import GridSpec
from subplanck.hypercube import KrausSpec


@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_number_state_origin_value(k):
    rho = fockoracle.number_density(k, 12)
    assert fockoracle.fock_wigner_points(rho, 0.0, 0.0) == pytest.approx((-1) ** k / math.pi)


def test_number_state_closed_form():
    # W_1 = (2 r^2 - 1) exp(-r^2) / pi
    x = np.linspace(-3, 3, 13)
    w = fockoracle.fock_wigner_points(fockoracle.number_density(1, 8), x, 0.4)
    r2 = x ** 2 + 0.16
    assert w == pytest.approx((2 * r2 - 1) * np.exp(-r2) / math.pi, abs=1e-14)


@given(st.complex_numbers(max_magnitude=6, allow_nan=False, allow_infinity=False))
def test_coherent_state_matches_analytic(alpha):
    rho = fockoracle.coherent_density(alpha, 40 + int(3 * abs(alpha) ** 2))
    gs = GridSpec.square(abs(alpha) * 1.5 + 4, 21)
    a = fockoracle.fock_wigner(rho, gs).values
    b = core.evaluate_grid(core.coherent_state(alpha), gs).values
    assert np.abs(a - b).max() < 1e-10


def test_thermal_populations():
    pop = fockoracle.fock_thermal(1.5, 80).diagonal().real
    assert pop.sum() == pytest.approx(1.0)
    assert (np.arange(81) * pop).sum() == pytest.approx(1.5, rel=1e-6)


def test_displacement_is_unitary():
    a = 0.7 + 0.2j
    d = fockoracle.fock_displacement(a, 40)
    assert np.abs(d @ d.conj().T - np.eye(41)).max() < 1e-12
    # on the vacuum: coherent amplitudes e^{-|a|^2/2} a^k / sqrt(k!)
    k = np.arange(10)
    ref = np.exp(-abs(a) ** 2 / 2) * a ** k / np.sqrt([math.factorial(i) for i in k])
    assert d[:10, 0] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("n,mu,nbar", [(1, 2.0, 0.0), (2, 1.0, 0.5), (3, 0.5, 1.0)])
def test_built_state_agrees_with_analytic(n, mu, nbar):
    spec = KrausSpec(n, mu, nbar=nbar)
    rho = fockoracle.fock_build(spec)
    assert rho.trace() == pytest.approx(1.0)
    st_ = hypercube.build_state(spec)
    gs = core.default_grid(st_, max_points=48)
    a = fockoracle.fock_wigner(rho, gs).values
    b = core.evaluate_grid(st_, gs).values
    assert np.abs(a - b).max() < 1e-9


def test_cutoff_guard():
    with pytest.raises(fockoracle.CutoffTooSmall):
        fockoracle.fock_build(KrausSpec(2, 6.0), cutoff=20)


def test_wigner_requires_gridspec():
    with pytest.raises(TypeError):
        fockoracle.fock_wigner(fockoracle.number_density(0, 4), (1, 2))
