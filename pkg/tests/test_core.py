import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subplanck import core, hypercube
from subplanck.core import GaussianTerm, GridSpec

amps = st.complex_numbers(max_magnitude=4.0, allow_nan=False, allow_infinity=False)


def _state(n, mu, nbar=0.0, **kw):
    return hypercube.build_state(hypercube.KrausSpec(n, mu, nbar=nbar, **kw))


def test_vacuum_peak_is_one_over_pi():
    g = core.evaluate_grid(core.coherent_state(0j), GridSpec.square(3.0, 61))
    assert g.values.max() == pytest.approx(1 / math.pi, rel=1e-12)


def test_thermal_peak():
    g = core.evaluate_grid(core.coherent_state(0j, 2.0), GridSpec.square(3.0, 61))
    assert g.values.max() == pytest.approx(1 / (5 * math.pi), rel=1e-12)


def test_coherent_centre_location():
    # gamma sits at (sqrt2 Re gamma, sqrt2 Im gamma)
    gamma = 1.0 - 0.5j
    st_ = core.coherent_state(gamma)
    x0, p0 = core.to_xp(gamma)
    assert (x0, p0) == pytest.approx((math.sqrt(2), -math.sqrt(2) / 2))
    assert core.evaluate_points(st_, x0, p0) == pytest.approx(1 / math.pi)


@given(amps, amps)
def test_compose_displacements_is_a_group_law(a, b):
    ph, c = core.compose_displacements(a, b)
    assert c == pytest.approx(a + b)
    assert abs(ph) == pytest.approx(1.0)
    ph2, _ = core.compose_displacements(b, a)
    assert ph * ph2 == pytest.approx(1.0)


@given(amps, amps, st.floats(0, 3))
def test_term_trace_matches_grid_integral(gl, gr, nbar):
    t = GaussianTerm(1.0 + 0j, gl, gr)
    hw = 2.0 * max(abs(gl), abs(gr)) + 6.0 * math.sqrt(2 * nbar + 1)
    g = GridSpec.square(hw, 301)
    xs, ps = g.mesh()
    w = core.wigner_term(t, nbar, xs, ps)
    assert np.sum(w) * g.cell_area == pytest.approx(core.term_trace(t, nbar), abs=1e-8)


def test_term_counts():
    assert [len(_state(n, 1.0).terms) for n in (1, 2, 3, 4)] == [4, 16, 64, 256]


@given(st.integers(1, 4), st.floats(0.1, 8), st.floats(0, 3))
def test_state_is_normalised_and_real(n, mu, nbar):
    s = _state(n, mu, nbar)
    # the term sum cancels 4^n contributions of size ~1/mu^(2n) at small mu
    tol = 1e-12 * max(1.0, mu ** (-2 * n))
    assert s.trace_from_terms() == pytest.approx(1.0, abs=tol)
    g = core.evaluate_grid(s)
    assert g.imag_residual < 1e-10
    assert g.quadrature_sum() == pytest.approx(1.0, abs=1e-4)


@given(st.integers(1, 3), st.floats(0.2, 6), st.floats(0, 2))
def test_conjugate_pairs_and_pruning(n, mu, nbar):
    s = _state(n, mu, nbar)
    keys = {(t.gamma_l, t.gamma_r): t.coeff for t in s.terms}
    for (gl, gr), c in keys.items():
        assert keys[(gr, gl)] == pytest.approx(c.conjugate())
    gs = core.default_grid(s, max_points=64)
    a = core.evaluate_grid(s, gs, method="terms", prune=True).values
    b = core.evaluate_grid(s, gs, method="terms", prune=False).values
    assert np.abs(a - b).max() < 1e-13 * max(1.0, mu ** (-2 * n))


@pytest.mark.parametrize("n,mu", [(2, 0.05), (3, 0.1), (2, 0.3)])
def test_chain_and_term_routes_agree(n, mu):
    s = _state(n, mu)
    gs = core.default_grid(s, max_points=64)
    a = core.evaluate_grid(s, gs, method="chain").values
    b = core.evaluate_grid(s, gs, method="terms").values
    assert np.abs(a - b).max() < 1e-8


def test_tiny_mu_is_finite_and_normalised():
    s = _state(3, 8e-9)
    g = core.evaluate_grid(s)
    assert np.isfinite(g.values).all()
    assert g.quadrature_sum() == pytest.approx(1.0, abs=1e-6)
    assert g.values.min() < -0.1


@given(amps, st.floats(-math.pi, math.pi))
def test_displacement_and_rotation_move_the_state(delta, theta):
    s = _state(2, 1.5, 0.3)
    x = np.array([0.3, -1.1, 2.0])
    p = np.array([0.7, 0.2, -1.4])
    dx, dp = core.to_xp(delta)
    moved = core.evaluate_points(s.displaced(delta), x + dx, p + dp, method="terms")
    assert moved == pytest.approx(core.evaluate_points(s, x, p, method="terms"), abs=1e-10)
    c, sn = math.cos(theta), math.sin(theta)
    rot = core.evaluate_points(s.rotated(theta), c * x - sn * p, sn * x + c * p, method="terms")
    assert rot == pytest.approx(core.evaluate_points(s, x, p, method="terms"), abs=1e-10)


def test_zero_norm_state():
    with pytest.raises(core.ZeroNormState):
        _state(1, 0.0)


def test_mixture_normalisation_and_nbar_check():
    m = core.mixture([core.coherent_state(1.0), core.coherent_state(-1.0)], [1, 3])
    assert m.trace_from_terms() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        core.mixture([core.coherent_state(0j), core.coherent_state(0j, 1.0)])


def test_reference_states():
    gs = GridSpec.square(8.0, 201)
    for ref in (core.GaussianReferenceState(),
                core.GaussianReferenceState("thermal", 0.5j, 1.5),
                core.GaussianReferenceState("squeezed-thermal", 0j, 0.7, 3.0, 0.4)):
        g = core.reference_wigner(ref, gs)
        assert g.quadrature_sum() == pytest.approx(1.0, abs=1e-6)
    sq = core.GaussianReferenceState("squeezed-thermal", 0j, 0.0, 3.0, 0.0)
    cov = sq.covariance()
    assert cov[0, 0] == pytest.approx(0.5 * 10 ** -0.3)
    assert np.linalg.det(cov) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        core.GaussianReferenceState("coherent", nbar=1.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(1.0, -1.0, -1.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        GridSpec.square(1.0, 1)


def test_default_grid_covers_the_state():
    s = _state(4, 12.0)
    spec = core.default_grid(s)
    r = max(abs(c) for c in s.centers()) * math.sqrt(2)
    assert spec.x_max > r and spec.p_max > r
    assert core.default_grid(s, max_points=300).nx <= 300


def test_evaluate_axes_matches_grid():
    s = _state(2, 2.0, 0.5)
    gs = core.default_grid(s, max_points=50)
    assert np.allclose(core.evaluate_axes(s, gs.xs, gs.ps), core.evaluate_grid(s, gs).values, atol=1e-13)


def test_odd_cat_is_negative_at_its_centroid():
    s = _state(1, 6.0)
    c = sum(s.centers()) / 2
    assert core.evaluate_points(s, *core.to_xp(c)).real == pytest.approx(-1 / math.pi, rel=1e-9)
