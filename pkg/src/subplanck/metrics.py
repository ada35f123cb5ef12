"""Quantitative indicators on Wigner functions.

All quadratures are plain Riemann sums ``sum(f) * cell_area`` on the grid.
The sensitivity routines displace states analytically and stream the grid
through in row blocks, so grids far larger than memory-sized arrays work.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from subplanck import core
from subplanck.core import GaussianReferenceState, GridSpec, PhaseSpaceState, WignerGrid

DIRECTIONS = {"position": 0.0, "momentum": math.pi / 2}

# per-axis cap for metric grids; 4x refinement of the largest states would
# otherwise need ~10^4 points per axis
MAX_METRIC_POINTS = 4096
_BLOCK = 1 << 21


class NumericalInstability(RuntimeError):
    pass


class DegenerateSamples(ValueError):
    pass


# --------------------------------------------------------------------------
# grid quantities
# --------------------------------------------------------------------------

def _check_same(w1, w2):
    if not w1.same_grid(w2):
        raise core.GridError("grids differ")


def l1_distance(w1, w2):
    """``sum |W1 - W2| * cell_area`` on identical grids."""
    _check_same(w1, w2)
    return float(np.abs(w1.values - w2.values).sum() * w1.cell_area)


def negativity_volume(grid):
    """Integrated negative part, ``sum (|W| - W)/2 * cell_area``."""
    v = grid.values
    return float(((np.abs(v) - v) * 0.5).sum() * grid.cell_area)


def min_wigner(grid):
    return float(grid.values.min())


def bhattacharyya(p, q, cell_area=None, tol=1e-12):
    """``sum sqrt(p q) * cell_area`` for two non-negative densities.

    ``p`` and ``q`` are WignerGrids on one grid or plain arrays (then
    ``cell_area`` defaults to 1, i.e. probability masses).  Values above
    ``-tol * max`` are clipped to zero; anything more negative is rejected.
    """
    if isinstance(p, WignerGrid) and isinstance(q, WignerGrid):
        _check_same(p, q)
        area = p.cell_area if cell_area is None else cell_area
        p, q = p.values, q.values
    else:
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        if p.shape != q.shape:
            raise core.GridError("densities differ in shape")
        area = 1.0 if cell_area is None else cell_area
    out = []
    for a in (p, q):
        floor = -tol * max(float(np.abs(a).max()), 1e-300)
        if a.min() < floor:
            raise ValueError("densities must be non-negative")
        out.append(np.clip(a, 0.0, None))
    return float(np.sqrt(out[0] * out[1]).sum() * area)


# --------------------------------------------------------------------------
# streaming evaluation of states and reference states
# --------------------------------------------------------------------------

def _values(obj, xs, ps):
    if isinstance(obj, PhaseSpaceState):
        return core.evaluate_axes(obj, xs, ps)
    if isinstance(obj, GaussianReferenceState):
        xx, pp = np.meshgrid(xs, ps, indexing="ij")
        return obj.points(xx, pp)
    raise TypeError(f"cannot evaluate {type(obj).__name__}")


def _shift(obj, delta):
    if isinstance(obj, PhaseSpaceState):
        return obj.displaced(delta)
    return dataclasses.replace(obj, center=complex(obj.center) + delta)


def _blocks(spec):
    xs, ps = spec.xs, spec.ps
    rows = max(1, _BLOCK // ps.size)
    for i in range(0, xs.size, rows):
        yield xs[i:i + rows], ps


def direction_angle(direction):
    if isinstance(direction, str):
        try:
            return DIRECTIONS[direction]
        except KeyError:
            raise ValueError(f"direction must be one of {sorted(DIRECTIONS)} or an angle") from None
    return float(direction)


def displacement(sigma, direction):
    """Complex amplitude moving a state by ``sigma`` along ``direction`` in (x, p)."""
    return sigma * complex(np.exp(1j * direction_angle(direction))) / core.SQRT2


def metric_grid(obj, refine=4.0, max_points=MAX_METRIC_POINTS):
    """Quadrature grid for metrics: the default grid refined ``refine`` times."""
    if isinstance(obj, PhaseSpaceState):
        return core.default_grid(obj, refine=refine, max_points=max_points)
    ev = np.linalg.eigvalsh(obj.covariance())
    smin, smax = math.sqrt(ev[0]), math.sqrt(ev[-1])
    hw = max(6.0, core.SQRT2 * abs(complex(obj.center)) + 8.0 * smax)
    n = int(math.ceil(2.0 * hw / (smin / (6.0 * refine)))) + 1
    return GridSpec.square(hw, min(max(n, 32), max_points))


def l1_curve(obj, sigmas, direction="position", spec=None):
    """``l1(sigma)`` between ``obj`` and its displaced copies, for each sigma."""
    sigmas = [float(s) for s in sigmas]
    if spec is None:
        spec = metric_grid(obj)
    shifted = [_shift(obj, displacement(s, direction)) for s in sigmas]
    acc = np.zeros(len(sigmas))
    for xs, ps in _blocks(spec):
        w0 = _values(obj, xs, ps)
        for k, s in enumerate(shifted):
            acc[k] += np.abs(_values(s, xs, ps) - w0).sum()
    return acc * spec.cell_area


@dataclass(frozen=True)
class SensitivityResult:
    direction: object
    value: float
    sigma_step: float
    grid_spec: GridSpec
    halvings: int = 0


def default_step(obj):
    """``1e-3 * min(1, fringe wavelength / 4)``."""
    lam = math.inf
    if isinstance(obj, PhaseSpaceState):
        sep = core.SQRT2 * obj.max_separation()
        if sep > 0:
            lam = 2.0 * math.pi / sep
    return 1e-3 * min(1.0, lam / 4.0)


def l1_sensitivity(obj, direction="position", sigma_step=None, spec=None,
                   rtol=0.01, max_halvings=10):
    """``d l1 / d sigma`` at zero displacement.

    Uses the quotient ``l1(s)/s`` (exact ``l1(0) = 0``) and accepts the step
    once ``l1(s/2)/(s/2)`` differs from it by less than ``rtol``; otherwise
    the step is halved, at most ``max_halvings`` times.
    """
    if sigma_step is None:
        sigma_step = default_step(obj)
    if not sigma_step > 0:
        raise ValueError("sigma_step must be positive")
    if spec is None:
        spec = metric_grid(obj)
    step = float(sigma_step)
    last = None
    for k in range(max_halvings + 1):
        l1 = l1_curve(obj, [step, step / 2], direction, spec)
        q1, q2 = l1[0] / step, l1[1] / (step / 2)
        if not (np.isfinite(q1) and np.isfinite(q2)):
            raise NumericalInstability("non-finite l1 quotient")
        if abs(q1 - q2) <= rtol * max(abs(q2), 1e-300):
            return SensitivityResult(direction, float(q1), step, spec, k)
        last = (q1, q2)
        step /= 2
    raise NumericalInstability(f"step halving did not converge (last quotients {last})")


def wigner_summary(state, spec=None):
    """Negativity volume, minimum, normalisation and mean phonon number, streamed."""
    if spec is None:
        spec = metric_grid(state)
    neg = 0.0
    wmin = math.inf
    norm = 0.0
    r2 = 0.0
    for xs, ps in _blocks(spec):
        w = _values(state, xs, ps)
        neg += ((np.abs(w) - w) * 0.5).sum()
        wmin = min(wmin, float(w.min()))
        norm += w.sum()
        r2 += (w * (xs[:, None] ** 2 + ps[None, :] ** 2)).sum()
    a = spec.cell_area
    return {
        "negativity_volume": float(neg * a),
        "min_wigner": wmin,
        "norm": float(norm * a),
        "mean_phonons": float(0.5 * r2 * a - 0.5),
    }


def squeezed_reference(mean_phonons, squeeze_db=3.0, direction="position", center=0j):
    """Squeezed thermal state with the given mean phonon number.

    Squeezing is along ``direction`` (narrow along the displacement).  When
    the squeezing alone already exceeds ``mean_phonons`` the thermal part is
    clipped to zero.
    """
    s = 10.0 ** (-squeeze_db / 10.0)
    nb = (2.0 * mean_phonons + 1.0) / (s + 1.0 / s) - 0.5
    return GaussianReferenceState("squeezed-thermal", center, max(nb, 0.0), squeeze_db,
                                  direction_angle(direction))


# --------------------------------------------------------------------------
# empirical scaling law
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingCoefficients:
    """Coefficients of the empirical sensitivity law.

    ``(a1 n + a2) exp((b1 n + b2) nbar) + exp(c1 mu)(c2 + c3 n) mu^2
    + (d1 + d2 n) mu + exp(e1 mu) + f1 n + f2``
    """

    a1: float = 1.164
    a2: float = 0.046
    b1: float = -0.526
    b2: float = 0.248
    c1: float = -0.795
    c2: float = 2.076
    c3: float = -1.377
    d1: float = -0.485
    d2: float = 0.698
    e1: float = -0.807
    f1: float = -0.063
    f2: float = -0.776
    chi2: float = None
    chi2_total: float = None

    NAMES = ("a1", "a2", "b1", "b2", "c1", "c2", "c3", "d1", "d2", "e1", "f1", "f2")

    def vector(self):
        return np.array([getattr(self, k) for k in self.NAMES])

    @classmethod
    def from_vector(cls, v, chi2=None, chi2_total=None):
        return cls(*[float(x) for x in v], chi2=chi2, chi2_total=chi2_total)


PAPER_COEFFICIENTS = ScalingCoefficients(chi2=0.29)


def _scaling(v, n, nbar, mu):
    a1, a2, b1, b2, c1, c2, c3, d1, d2, e1, f1, f2 = v
    return ((a1 * n + a2) * np.exp((b1 * n + b2) * nbar)
            + np.exp(c1 * mu) * (c2 + c3 * n) * mu ** 2
            + (d1 + d2 * n) * mu
            + np.exp(e1 * mu) + f1 * n + f2)


def scaling_formula(n, nbar, mu, coeffs=PAPER_COEFFICIENTS):
    """Empirical ``d l1/d sigma`` law; broadcasts over array arguments."""
    out = _scaling(coeffs.vector(), np.asarray(n, float), np.asarray(nbar, float), np.asarray(mu, float))
    return float(out) if np.ndim(out) == 0 else out


def pearson_chi2(measured, predicted):
    """``sum (y - f)^2 / f``."""
    y = np.asarray(measured, float)
    f = np.asarray(predicted, float)
    return float(((y - f) ** 2 / f).sum())


def fit_scaling(samples, guess=PAPER_COEFFICIENTS, min_samples=30):
    """Refit the scaling law to ``(n, nbar, mu, value)`` rows.

    Levenberg-Marquardt on residuals ``(y - f)/sqrt(y)``.  The returned
    ``chi2`` is the Pearson statistic per degree of freedom,
    ``sum((y - f)^2 / f) / (N - 12)``; ``chi2_total`` is the plain sum.
    """
    arr = np.asarray(samples, float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise DegenerateSamples("samples must be (n, nbar, mu, value) rows")
    if arr.shape[0] < min_samples:
        raise DegenerateSamples(f"need at least {min_samples} samples, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateSamples("non-finite samples")
    n, nbar, mu, y = arr.T
    if np.any(y <= 0):
        raise DegenerateSamples("sensitivities must be positive")
    if np.unique(n).size < 2 or np.unique(nbar).size < 2 or np.unique(mu).size < 3:
        raise DegenerateSamples("samples must vary n, nbar and mu")
    if np.ptp(y) <= 1e-9 * float(y.max()):
        raise DegenerateSamples("constant samples carry no scaling information")
    sw = 1.0 / np.sqrt(y)
    res = least_squares(lambda v: (_scaling(v, n, nbar, mu) - y) * sw, guess.vector(), method="lm",
                        max_nfev=20000, xtol=1e-12, ftol=1e-12)
    npar = len(ScalingCoefficients.NAMES)
    rank = np.linalg.matrix_rank(res.jac, tol=1e-10 * np.abs(res.jac).max())
    if rank < npar:
        raise DegenerateSamples(f"scaling fit is rank deficient (rank {rank})")
    f = _scaling(res.x, n, nbar, mu)
    total = pearson_chi2(y, f) if np.all(f > 0) else math.inf
    dof = max(arr.shape[0] - npar, 1)
    return ScalingCoefficients.from_vector(res.x, chi2=total / dof, chi2_total=total)


SWEEP_COLUMNS = ("n", "nbar", "mu", "direction", "dl1_dsigma", "negativity_volume", "min_wigner")
