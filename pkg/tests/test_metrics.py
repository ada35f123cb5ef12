import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subplanck import core, hypercube, metrics
from subplanck.core import GridSpec, WignerGrid
from subplanck.hypercube import KrausSpec

COHERENT = 2 / math.sqrt(math.pi)


def _state(n, mu, nbar=0.0):
    return hypercube.build_state(KrausSpec(n, mu, nbar=nbar))


def test_l1_identity_and_symmetry():
    g1 = core.evaluate_grid(_state(2, 1.0), GridSpec.square(6, 80))
    g2 = core.evaluate_grid(_state(2, 1.3), GridSpec.square(6, 80))
    assert metrics.l1_distance(g1, g1) == 0
    assert metrics.l1_distance(g1, g2) == pytest.approx(metrics.l1_distance(g2, g1))
    with pytest.raises(core.GridError):
        metrics.l1_distance(g1, core.evaluate_grid(_state(2, 1.0), GridSpec.square(6, 81)))


def test_negativity_of_positive_state_is_zero():
    g = core.evaluate_grid(core.coherent_state(0.5), GridSpec.square(5, 101))
    assert metrics.negativity_volume(g) == 0
    assert metrics.min_wigner(g) >= 0


def test_fock_one_negativity():
    # W_1 = (2r^2 - 1) e^{-r^2}/pi is negative for r^2 < 1/2, enclosing 2/sqrt(e) - 1
    from subplanck import fockoracle

    gs = GridSpec.square(6, 401)
    g = fockoracle.fock_wigner(fockoracle.number_density(1, 6), gs)
    expected = 2 * math.exp(-0.5) - 1
    assert metrics.negativity_volume(g) == pytest.approx(expected, rel=1e-3)


def test_bhattacharyya_properties():
    gs = GridSpec.square(8, 201)
    p = core.reference_wigner(core.GaussianReferenceState(center=0j), gs)
    # vacua a distance sqrt2 apart, variance 1/2: BC = exp(-d^2 / (8 var)) = e^{-1/2}
    q = core.reference_wigner(core.GaussianReferenceState(center=1.0 + 0j), gs)
    assert metrics.bhattacharyya(p, p) == pytest.approx(1.0, abs=1e-9)
    assert metrics.bhattacharyya(p, q) == pytest.approx(math.exp(-0.5), abs=1e-9)
    with pytest.raises(ValueError):
        metrics.bhattacharyya(np.array([1.0, -0.5]), np.array([1.0, 1.0]))


@given(st.lists(st.floats(0, 10), min_size=2, max_size=20))
def test_bhattacharyya_bounded(xs):
    a = np.array(xs) + 1e-3
    b = a[::-1].copy()
    a, b = a / a.sum(), b / b.sum()
    assert 0 <= metrics.bhattacharyya(a, b) <= 1 + 1e-12


def test_directions():
    assert metrics.displacement(1.0, "position") == pytest.approx(1 / math.sqrt(2))
    assert metrics.displacement(1.0, "momentum") == pytest.approx(1j / math.sqrt(2))
    assert metrics.direction_angle(0.3) == 0.3
    with pytest.raises(ValueError):
        metrics.direction_angle("diagonal")


@pytest.mark.parametrize("nbar", [0.0, 1.0, 4.0])
def test_coherent_and_thermal_sensitivity(nbar):
    v = metrics.l1_sensitivity(core.coherent_state(0j, nbar)).value
    assert v == pytest.approx(COHERENT / math.sqrt(2 * nbar + 1), rel=1e-3)


def test_l1_curve_starts_at_zero_and_grows():
    c = metrics.l1_curve(_state(2, 2.0), [0.0, 0.05, 0.1, 0.2], "momentum")
    assert c[0] == 0
    assert np.all(np.diff(c) > 0)


def test_sensitivity_reports_convergence():
    r = metrics.l1_sensitivity(_state(2, 2.0), "momentum")
    assert r.direction == "momentum"
    assert r.value > COHERENT
    assert r.sigma_step > 0


def test_reference_objects_in_sensitivity():
    ref = core.GaussianReferenceState("thermal", 0j, 1.0)
    assert metrics.l1_sensitivity(ref).value == pytest.approx(COHERENT / math.sqrt(3), rel=1e-3)


def test_squeezing_helps_along_the_squeezed_axis():
    sq = metrics.squeezed_reference(0.5, 3.0, "position")
    v_pos = metrics.l1_sensitivity(sq, "position").value
    v_mom = metrics.l1_sensitivity(sq, "momentum").value
    assert v_pos > v_mom
    # mean phonon number is preserved
    gs = GridSpec.square(8, 301)
    g = core.reference_wigner(sq, gs)
    xx, pp = gs.mesh()
    mean_n = 0.5 * (g.values * (xx ** 2 + pp ** 2)).sum() * gs.cell_area - 0.5
    assert mean_n == pytest.approx(0.5, rel=1e-6)


def test_wigner_summary_coherent():
    s = metrics.wigner_summary(core.coherent_state(1.0 + 1.0j))
    assert s["norm"] == pytest.approx(1.0, abs=1e-8)
    assert s["mean_phonons"] == pytest.approx(2.0, abs=1e-6)
    assert s["negativity_volume"] == 0


def test_scaling_formula_broadcast_and_values():
    v = metrics.scaling_formula([2, 3], 0.0, 4.0)
    assert v.shape == (2,)
    c = metrics.PAPER_COEFFICIENTS
    one = metrics.scaling_formula(2, 0.0, 0.0)
    assert one == pytest.approx(2 * c.a1 + c.a2 + 1 + 2 * c.f1 + c.f2)


def test_fit_scaling_recovers_synthetic_law():
    rng = np.random.default_rng(1)
    true = metrics.PAPER_COEFFICIENTS
    n, nb, mu = np.meshgrid([2, 3, 4], [0, 0.5, 1, 2], [0.5, 1, 2, 4, 6, 8], indexing="ij")
    n, nb, mu = n.ravel(), nb.ravel(), mu.ravel()
    y = metrics.scaling_formula(n, nb, mu, true)
    keep = y > 0
    rows = np.column_stack([n, nb, mu, y])[keep]
    start = metrics.ScalingCoefficients.from_vector(true.vector() * (1 + 0.02 * rng.normal(size=12)))
    fit = metrics.fit_scaling(rows, start)
    assert fit.chi2 < 1e-10
    pred = metrics.scaling_formula(rows[:, 0], rows[:, 1], rows[:, 2], fit)
    assert pred == pytest.approx(rows[:, 3], rel=1e-6)


@pytest.mark.parametrize("mutate", ["few", "constant", "negative", "no_mu_spread"])
def test_fit_scaling_rejects_degenerate(mutate):
    n, nb, mu = np.meshgrid([2, 3, 4], [0, 1, 2], [1, 2, 4, 6], indexing="ij")
    rows = np.column_stack([n.ravel(), nb.ravel(), mu.ravel(), 1 + mu.ravel()]).astype(float)
    if mutate == "few":
        rows = rows[:10]
    elif mutate == "constant":
        rows[:, 3] = 2.0
    elif mutate == "negative":
        rows[0, 3] = -1.0
    else:
        rows[:, 2] = 1.0
    with pytest.raises(metrics.DegenerateSamples):
        metrics.fit_scaling(rows)


def test_pearson_chi2():
    assert metrics.pearson_chi2([1, 2], [1, 2]) == 0
    assert metrics.pearson_chi2([2], [1]) == 1
