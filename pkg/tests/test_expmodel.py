import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from subplanck import core, expmodel, hypercube, metrics
from subplanck.hypercube import KrausSpec

OMEGA = 2 * math.pi * expmodel.F_M_HZ


def _params(X=3.0, P=-2.0, phi=0.7):
    return expmodel.TraceModelParams(1.0, OMEGA, X, P, phi, 0.1, 0.2)


def test_trace_model_finite_at_p_zero():
    y = expmodel.trace_model(_params(X=1.0, P=0.0), np.linspace(0, 1e-5, 50))
    assert np.all(np.isfinite(y))


def test_trace_params_validation():
    with pytest.raises(ValueError):
        expmodel.TraceModelParams(0.0, OMEGA, 1, 1)
    with pytest.raises(ValueError):
        expmodel.TraceModelParams(1.0, OMEGA, 1, 1, d=1.0)


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-1, 1))
def test_noiseless_trace_fit(X, P, phi):
    # near (0, 0) the trace is barely modulated and (X, P, phi) are not identifiable
    assume(math.hypot(X, P) >= 0.5)
    true = _params(X, P, phi)
    guess = _params(X + 0.1, P - 0.1, phi + 0.05)
    fit = expmodel.fit_trace(expmodel.synth_trace(true), guess)
    assert (fit.X, fit.P, fit.phi) == pytest.approx((X, P, phi), abs=1e-6)


def test_degenerate_trace():
    t = np.linspace(0, 1e-5, 100)
    with pytest.raises(expmodel.DegenerateTrace):
        expmodel.fit_trace(np.column_stack([t, np.zeros_like(t)]), _params())
    with pytest.raises(ValueError):
        expmodel.fit_trace(np.zeros((5, 3)), _params())


def test_drive_sample_statistics_and_seeding():
    a = expmodel.chi_drive_sample(100.0, 50000, 3)
    b = expmodel.chi_drive_sample(100.0, 50000, 3)
    assert np.array_equal(a, b)
    assert a.var(axis=0) == pytest.approx([100.5, 100.5], rel=0.03)
    assert not np.array_equal(a, expmodel.chi_drive_sample(100.0, 50000, 4))


def test_herald_config():
    cfg = expmodel.HeraldConfig(3, 0.1, 10.0)
    assert cfg.delays == (1 / 6, 1 / 6)
    assert cfg.detection_phases() == pytest.approx([0, math.pi / 3, 2 * math.pi / 3])
    with pytest.raises(ValueError):
        expmodel.HeraldConfig(3, 0.1, 10.0, detection_times=(0.1,))
    assert expmodel.measured_delays(2)[0] == pytest.approx(2.36e-6 * expmodel.F_M_HZ)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_herald_weight_bounds_and_phi_pi_form(X, P):
    cfg = expmodel.HeraldConfig(2, 0.3, 100.0)
    w = expmodel.herald_weights(cfg, [[X, P]])[0]
    assert 0 <= w <= 1
    x2 = X * math.cos(math.pi / 2) + P * math.sin(math.pi / 2)
    assert w == pytest.approx(math.sin(0.3 * X / 2) ** 2 * math.sin(0.3 * x2 / 2) ** 2, abs=1e-12)


def test_phi_drift_average():
    spec = KrausSpec(2, 1.0)
    with pytest.raises(expmodel.EmptyAfterRejection):
        expmodel.phi_drift_average(spec, [0.0, 1.0])
    st1 = expmodel.phi_drift_average(spec, [math.pi])
    assert st1.trace_from_terms() == pytest.approx(1.0)
    mix = expmodel.phi_drift_average(spec, [math.pi - 0.1, math.pi + 0.1, 0.0])
    assert mix.trace_from_terms() == pytest.approx(1.0)


def test_timing_jitter_average():
    spec = KrausSpec(2, 2.0)
    same = expmodel.timing_jitter_average(spec, 0.0)
    assert same.terms == hypercube.build_state(spec).terms
    assert expmodel.jitter_angle(15e-9, 1 / expmodel.F_M_HZ) == pytest.approx(2 * math.pi * 15e-9 * expmodel.F_M_HZ)
    s = expmodel.timing_jitter_average(spec)
    assert s.trace_from_terms() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expmodel.timing_jitter_average(spec, -1.0)


def test_poisson_resample_is_seeded_and_normalised():
    cfg = expmodel.HeraldConfig(2, 1e-7, 1e13)
    spec = expmodel.hot_grid(cfg.nbar_drive, 41)
    d = expmodel.ideal_density(cfg, spec)
    a = expmodel.poisson_resample(d, 5000, 1)
    b = expmodel.poisson_resample(d, 5000, 1)
    assert np.array_equal(a.counts, b.counts)
    assert a.grid.quadrature_sum() == pytest.approx(1.0)
    empty = expmodel.poisson_resample(d, 0, 1)
    assert empty.empty


def test_pipeline_is_deterministic_and_seed_sensitive():
    cfg = expmodel.HeraldConfig(2, 1e-7, 1e13, sample_count=20000, rng_seed=5)
    spec = expmodel.hot_grid(cfg.nbar_drive, 31)
    imp = expmodel.Imperfections.typical(2000)
    a = expmodel.model_pipeline(cfg, imp, spec)
    b = expmodel.model_pipeline(cfg, imp, spec)
    assert np.array_equal(a.grid.values, b.grid.values)
    c = expmodel.model_pipeline(cfg.__class__(**{**cfg.__dict__, "rng_seed": 6}), imp, spec)
    assert not np.array_equal(a.grid.values, c.grid.values)


def test_angular_marginal_and_lobes():
    # a synthetic density with six lobes
    spec = core.GridSpec.square(3, 121)
    xx, pp = spec.mesh()
    r, th = np.hypot(xx, pp), np.arctan2(pp, xx)
    vals = np.exp(-(r - 2) ** 2 * 4) * (1 + np.cos(6 * th))
    g = core.WignerGrid(spec, vals / (vals.sum() * spec.cell_area))
    ang, h = expmodel.angular_marginal(g)
    assert h.sum() == pytest.approx(1.0)
    assert expmodel.count_lobes(h)[0] == 6
    assert expmodel.lobe_angles(g).size == 6
    assert expmodel.count_lobes(np.ones(10))[0] == 0


def test_ideal_pipeline_is_close_to_ideal_density():
    cfg = expmodel.HeraldConfig(2, 1e-7, 1e13, sample_count=400000)
    spec = expmodel.hot_grid(cfg.nbar_drive, 41)
    m = expmodel.model_pipeline(cfg, expmodel.Imperfections(), spec)
    assert metrics.bhattacharyya(m.grid, expmodel.ideal_density(cfg, spec)) > 0.99


def test_quantum_and_semiclassical_drift_paths_agree():
    # at nbar = 1e4 both averaging paths are tractable; they should agree with
    # each other much better than either agrees with the drift-free density
    nbar = 1e4
    mu = 0.5 / math.sqrt(2 * nbar + 1)
    spec = expmodel.hot_grid(nbar, 61)
    cfg = expmodel.HeraldConfig(2, mu, nbar, sample_count=1_000_000, rng_seed=1)
    pipe = expmodel.model_pipeline(cfg, expmodel.Imperfections(phi_drift_deg=40.0), spec)
    phis = math.pi + np.radians(np.linspace(-20, 20, 9))
    st = expmodel.phi_drift_average(KrausSpec(2, mu, nbar=nbar), phis, cut_deg=20)
    w = core.evaluate_grid(st, spec).values[::-1, :]
    quantum = core.WignerGrid(spec, w / (w.sum() * spec.cell_area))
    agree = metrics.bhattacharyya(pipe.grid, quantum, tol=1e-6)
    assert agree > 0.98
    assert agree > metrics.bhattacharyya(pipe.grid, expmodel.ideal_density(cfg, spec)) + 0.05
