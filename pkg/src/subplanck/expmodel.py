"""Experimental imperfections and the hot-regime (semiclassical) pipeline.

Phase-space coordinates are the ``(x, p)`` quadratures of :mod:`subplanck.core`
(ground-state units, vacuum variance 1/2).  Classically, a heralded photon
multiplies the phase-space density by ``|exp(i mu X) + exp(i phi)|^2 / 4
= cos^2((mu X - phi)/2)``, which is ``sin^2(mu X / 2)`` at ``phi = pi``.

Random streams: every stochastic routine takes an integer seed and derives
independent children with ``numpy.random.SeedSequence(seed).spawn``.  Drive
samples are drawn in fixed blocks of ``SAMPLE_BLOCK`` with one child stream
per block, so results do not depend on how blocks are scheduled.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from subplanck import core
from subplanck.core import GridSpec, WignerGrid
from subplanck.hypercube import build_state

F_M_HZ = 105.64e3
READOUT_UNIT_M = 158.2e-9
TIMING_JITTER_S = 15e-9
PHI_CUT_DEG = 10.0
SAMPLE_BLOCK = 1 << 16

# measured inter-photon delays (seconds) for orders 2, 3, 4
MEASURED_DELAYS_S = {
    2: (2.36e-6,),
    3: (1.57e-6, 1.57e-6),
    4: (1.24e-6, 1.12e-6, 1.18e-6),
}


class NonConvergence(RuntimeError):
    pass


class DegenerateTrace(ValueError):
    pass


class EmptyAfterRejection(ValueError):
    pass


# --------------------------------------------------------------------------
# homodyne trace model and fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceModelParams:
    A: float
    omega_M: float
    X: float
    P: float
    phi: float = 0.0
    c: float = 0.0
    d: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be positive")
        if not self.omega_M > 0:
            raise ValueError("omega_M must be positive")
        if not 0 <= self.d < 1:
            raise ValueError("d must lie in [0, 1)")


def trace_model(params, t):
    """Homodyne signal of a mechanical state at ``(X, P)``.

    ``(1 - d |cos(w t + atan2(X, P) - pi/4)|) * A cos(X cos(w t) + P sin(w t) + phi + c)``;
    the two-argument arctangent keeps ``P = 0`` finite.
    """
    t = np.asarray(t, float)
    w = params.omega_M * t
    env = 1.0 - params.d * np.abs(np.cos(w + math.atan2(params.X, params.P) - math.pi / 4))
    return env * params.A * np.cos(params.X * np.cos(w) + params.P * np.sin(w) + params.phi + params.c)


def fit_trace(samples, guess, max_iter=200, rtol=1e-10, min_amplitude=1e-9):
    """Fit ``X, P, phi`` of a homodyne trace; ``A, omega_M, c, d`` stay at ``guess``.

    ``samples`` is an ``(N, 2)`` array of ``(t, value)``.  Damped least squares
    (Levenberg-Marquardt) with a finite-difference Jacobian.
    """
    arr = np.asarray(samples, float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be (t, value) pairs")
    t, y = arr[:, 0], arr[:, 1]
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    if np.sqrt(np.mean(y * y)) < min_amplitude * guess.A:
        raise DegenerateTrace("trace amplitude below threshold")

    def resid(v):
        p = TraceModelParams(guess.A, guess.omega_M, v[0], v[1], v[2], guess.c, guess.d)
        return trace_model(p, t) - y

    v0 = np.array([guess.X, guess.P, guess.phi])
    res = least_squares(resid, v0, method="lm", jac="2-point", ftol=rtol, xtol=rtol,
                        gtol=1e-15, max_nfev=max_iter * (v0.size + 1))
    if res.status <= 0:
        raise NonConvergence(res.message)
    X, P, phi = res.x
    return TraceModelParams(guess.A, guess.omega_M, float(X), float(P), float(phi), guess.c, guess.d)


def synth_trace(params, n_points=2500, rate_hz=100e6, noise=0.0, seed=None):
    """``(t, value)`` samples, ``n_points`` at ``rate_hz``; optional Gaussian noise of std ``noise``."""
    t = np.arange(n_points) / rate_hz
    y = trace_model(params, t)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, n_points)
    return np.column_stack([t, y])


# --------------------------------------------------------------------------
# drive and heralding
# --------------------------------------------------------------------------

def _children(seed, k):
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(k)


def chi_drive_sample(nbar_drive, count, seed):
    """``count`` phase-space points of the driven (Gaussian) state.

    Each quadrature is normal with variance ``(2 nbar + 1)/2``, so the radius
    is Chi-distributed with two degrees of freedom.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sd = math.sqrt((2.0 * nbar_drive + 1.0) / 2.0)
    nblocks = -(-count // SAMPLE_BLOCK)
    out = np.empty((count, 2))
    for b, ss in enumerate(_children(seed, nblocks)):
        lo = b * SAMPLE_BLOCK
        hi = min(count, lo + SAMPLE_BLOCK)
        out[lo:hi] = np.random.default_rng(ss).normal(0.0, sd, (hi - lo, 2))
    return out


@dataclass(frozen=True)
class HeraldConfig:
    """Hot-regime heralding set-up.

    ``detection_times`` are the ``n - 1`` inter-photon delays in units of the
    mechanical period ``T = 1/f_m_hz``; ``None`` means ``1/(2n)`` each.
    """

    n: int
    mu: float
    nbar_drive: float
    sample_count: int = 200000
    rng_seed: int = 0
    detection_times: tuple = None
    f_m_hz: float = F_M_HZ

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("order n must be >= 1")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.detection_times is not None:
            object.__setattr__(self, "detection_times", tuple(float(x) for x in self.detection_times))
            if len(self.detection_times) != self.n - 1:
                raise ValueError("detection_times needs n - 1 delays")

    @property
    def period(self):
        return 1.0 / self.f_m_hz

    @property
    def delays(self):
        if self.detection_times is None:
            return (1.0 / (2 * self.n),) * (self.n - 1)
        return self.detection_times

    def detection_phases(self, delay_shift=0.0):
        """``omega_M t_k`` for k = 0..n-1 (first photon at t = 0).

        ``delay_shift`` (units of T) is added to every delay.
        """
        acc = np.concatenate([[0.0], np.cumsum(np.asarray(self.delays) + delay_shift)])
        return 2.0 * math.pi * acc


def measured_delays(n, f_m_hz=F_M_HZ):
    """The measured delays for order ``n`` in units of ``T``."""
    return tuple(d * f_m_hz for d in MEASURED_DELAYS_S[n])


def herald_weights(config, points, phi=math.pi, delay_shift=0.0):
    """Classical heralding weight ``prod_k cos^2((mu X_k - phi)/2)``.

    ``X_k = X cos(w t_k) + P sin(w t_k)``.  ``phi`` and ``delay_shift`` may be
    scalars or per-point arrays (drift and jitter); at ``phi = pi`` the
    factors are ``sin^2(mu X_k / 2)``.
    """
    pts = np.asarray(points, float).reshape(-1, 2)
    X, P = pts[:, 0], pts[:, 1]
    phi = np.asarray(phi, float)
    shift = np.asarray(delay_shift, float)
    delays = np.asarray(config.delays, float)
    w = np.ones(X.size)
    acc = np.zeros_like(shift, dtype=float)
    for k in range(config.n):
        if k > 0:
            acc = acc + delays[k - 1] + shift
        ang = 2.0 * math.pi * acc
        xk = X * np.cos(ang) + P * np.sin(ang)
        w = w * np.cos(0.5 * (config.mu * xk - phi)) ** 2
    return w


# --------------------------------------------------------------------------
# quantum-state averages
# --------------------------------------------------------------------------

def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def accepted_phases(phi_samples, cut_deg=PHI_CUT_DEG):
    """Samples within ``cut_deg`` of pi (wrapped)."""
    cut = math.radians(cut_deg)
    return [float(p) for p in phi_samples if abs(_wrap(p - math.pi)) <= cut + 1e-12]


def phi_drift_average(spec, phi_samples, cut_deg=PHI_CUT_DEG):
    """Uniform mixture of ``build_state`` over the accepted ``phi`` samples."""
    kept = accepted_phases(phi_samples, cut_deg)
    if not kept:
        raise EmptyAfterRejection(f"no phi sample within {cut_deg} degrees of pi")
    if len(kept) == 1:
        return build_state(spec.replace(phi=kept[0]))
    return core.mixture([build_state(spec.replace(phi=p)) for p in kept])


def jitter_angle(delta_t, T):
    """Rotation error ``2 pi delta_t / T`` from a timing error ``delta_t``."""
    return 2.0 * math.pi * delta_t / T


def timing_jitter_average(spec, delta_t=TIMING_JITTER_S, T=1.0 / F_M_HZ):
    """Equal mixture of the states with every step angle shifted by ``+-2 pi delta_t/T``."""
    if delta_t < 0:
        raise ValueError("delta_t must be non-negative")
    if delta_t == 0:
        return build_state(spec)
    eps = jitter_angle(delta_t, T)
    states = [build_state(spec.replace(step_angles=[a + s * eps for a in spec.angles])) for s in (1, -1)]
    return core.mixture(states)


# --------------------------------------------------------------------------
# densities, counting statistics and the pipeline
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalDensity:
    """Histogram density on a grid; ``grid.values`` integrates to 1 unless empty."""

    grid: WignerGrid
    counts: np.ndarray = field(repr=False)
    total: float = 0.0

    @property
    def empty(self):
        return self.total == 0


def hot_grid(nbar_drive, n_points=121, sigmas=4.5):
    hw = sigmas * math.sqrt((2.0 * nbar_drive + 1.0) / 2.0)
    return GridSpec.square(hw, n_points)


def _cell_edges(axis):
    h = axis[1] - axis[0]
    return np.concatenate([axis - h / 2, [axis[-1] + h / 2]])


def ideal_density(config, spec=None, phi=math.pi):
    """Drive Gaussian times heralding weight, normalised on the grid."""
    if spec is None:
        spec = hot_grid(config.nbar_drive)
    xx, pp = spec.mesh()
    var = (2.0 * config.nbar_drive + 1.0) / 2.0
    g = np.exp(-(xx * xx + pp * pp) / (2.0 * var))
    w = g * herald_weights(config, np.column_stack([xx.ravel(), pp.ravel()]), phi).reshape(xx.shape)
    return WignerGrid(spec, w / (w.sum() * spec.cell_area))


def histogram_density(points, weights, spec):
    xe, pe = _cell_edges(spec.xs), _cell_edges(spec.ps)
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=[xe, pe], weights=weights)
    tot = h.sum()
    vals = h / (tot * spec.cell_area) if tot > 0 else h
    return WignerGrid(spec, vals)


def poisson_resample(density, total_counts, seed):
    """Independent Poisson counts per cell with mean ``total_counts * p_cell``."""
    vals = density.values
    if vals.min() < 0:
        raise ValueError("density must be non-negative")
    mass = vals * density.cell_area
    s = mass.sum()
    if s <= 0:
        raise ValueError("density has no mass")
    mass = mass / s
    rng = np.random.default_rng(_children(seed, 1)[0])
    counts = rng.poisson(total_counts * mass).astype(float)
    tot = counts.sum()
    out = counts / (tot * density.cell_area) if tot > 0 else counts
    return EmpiricalDensity(WignerGrid(density.spec, out), counts, float(tot))


@dataclass(frozen=True)
class Imperfections:
    """Uncertainty model.

    ``phi_drift_deg`` is the peak-to-peak drift of ``phi`` within a data set
    (uniform about pi), ``delta_t`` the +- timing error in seconds and
    ``total_counts`` the number of recorded events (``None``: no counting noise).
    """

    phi_drift_deg: float = 0.0
    delta_t: float = 0.0
    total_counts: int = None

    @classmethod
    def typical(cls, total_counts=20000):
        return cls(PHI_CUT_DEG, TIMING_JITTER_S, total_counts)


def model_pipeline(config, imperfections=Imperfections(), spec=None):
    """Drive samples -> heralding weights -> histogram -> Poisson counts.

    Each sample gets its own ``phi`` (uniform within the drift range) and a
    random-sign timing error ``+-delta_t`` on every delay.  With
    ``total_counts=None`` the weighted histogram itself is returned.
    """
    if spec is None:
        spec = hot_grid(config.nbar_drive)
    s_drive, s_phi, s_time, s_count = _children(config.rng_seed, 4)
    pts = chi_drive_sample(config.nbar_drive, config.sample_count, s_drive)
    m = pts.shape[0]
    phi = math.pi
    if imperfections.phi_drift_deg > 0:
        half = 0.5 * math.radians(imperfections.phi_drift_deg)
        phi = math.pi + np.random.default_rng(s_phi).uniform(-half, half, m)
    shift = 0.0
    if imperfections.delta_t > 0:
        sign = np.random.default_rng(s_time).choice([-1.0, 1.0], m)
        shift = sign * imperfections.delta_t / config.period
    w = herald_weights(config, pts, phi, shift)
    dens = histogram_density(pts, w, spec)
    if imperfections.total_counts is None:
        return EmpiricalDensity(dens, dens.values * dens.cell_area, math.inf)
    return poisson_resample(dens, imperfections.total_counts, s_count)


# --------------------------------------------------------------------------
# angular structure
# --------------------------------------------------------------------------

def angular_marginal(grid, bins=72, supersample=8):
    """Probability mass per polar-angle bin about the origin.

    Each cell is split into ``supersample^2`` sub-cells before binning, which
    removes the aliasing of square cells against angular bins.
    """
    spec = grid.spec
    off = (np.arange(supersample) + 0.5) / supersample - 0.5
    mass = grid.values * grid.cell_area / supersample ** 2
    h = np.zeros(bins)
    for ox in off:
        for op in off:
            xx, pp = np.meshgrid(spec.xs + ox * spec.dx, spec.ps + op * spec.dp, indexing="ij")
            hh, edges = np.histogram(np.arctan2(pp, xx), bins=bins, range=(-math.pi, math.pi), weights=mass)
            h += hh
    return 0.5 * (edges[1:] + edges[:-1]), h


def count_lobes(marginal, prominence=0.2, smooth=3):
    """Peaks of a periodic angular marginal; prominence relative to its range."""
    m = np.asarray(marginal, float)
    if smooth > 1:
        k = np.ones(smooth) / smooth
        m = np.convolve(np.concatenate([m[-smooth:], m, m[:smooth]]), k, mode="same")[smooth:-smooth]
    rng = m.max() - m.min()
    if rng <= 0:
        return 0, np.array([], int)
    # roll so the global minimum sits at the ends; no peak is split across the seam
    shift = int(np.argmin(m))
    rolled = np.roll(m, -shift)
    idx, _ = find_peaks(rolled, prominence=prominence * rng)
    return idx.size, np.sort((idx + shift) % m.size)


def lobe_angles(grid, bins=72, **kw):
    centers, h = angular_marginal(grid, bins)
    _, idx = count_lobes(h, **kw)
    return centers[idx]
