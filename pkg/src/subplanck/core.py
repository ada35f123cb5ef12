"""Analytic phase-space representation of displaced-thermal Gaussian sums.

Conventions (hbar = 1):

* ``x = (b + b^dagger)/sqrt(2)``, ``p = (b - b^dagger)/(i sqrt(2))``; a complex
  amplitude ``gamma`` sits at ``(x, p) = sqrt(2) (Re gamma, Im gamma)``.
* ``W`` is a density in ``(x, p)``: the vacuum has ``W(0, 0) = 1/pi`` and
  variance 1/2 per quadrature; a thermal state has variance ``(2 nbar + 1)/2``.
* ``R(theta) = exp(i theta b^dagger b)`` moves a coherent centre ``gamma`` to
  ``gamma e^{i theta}`` (counter-clockwise).

A state is a finite sum of cross terms ``c D(gL) rho_th D(gR)^dagger``.  The
Wigner function of one such term is the closed form implemented in
:func:`wigner_term`::

    W(x, p) = c e^{i Im(gR* gL)} / (pi kappa)
              * exp(i dp (x - mx) - (x - mx)^2 / kappa)
              * exp(-i dx (p - mp) - (p - mp)^2 / kappa)

with ``kappa = 2 nbar + 1``, ``(mx, mp)`` the phase-space point of
``(gL + gR)/2`` and ``(dx, dp)`` that of ``gL - gR``.

States produced by a product of "identity plus displacement" operators are
additionally kept in factorised form (:class:`DisplacementChain`).  Summing
their 4^n terms directly loses all significant digits when the displacements
are tiny, so the chain form is evaluated through the cube-sum kernel instead.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from subplanck import kernels

SQRT2 = math.sqrt(2.0)
# 1/pi: vacuum Wigner maximum.  Read at call time (the validation negative
# control perturbs it).
PREFACTOR = 1.0 / math.pi

# chains whose pair exponents stay below this are evaluated on the cube route
CHAIN_QCAP = 1.0


class ZeroNormState(ValueError):
    """The operator sum has (numerically) zero trace and cannot be normalised."""


class GridError(ValueError):
    pass


# --------------------------------------------------------------------------
# displacement algebra
# --------------------------------------------------------------------------

def compose_displacements(a, b):
    """Return ``(phase, a + b)`` with ``D(a) D(b) = phase * D(a + b)``."""
    a = complex(a)
    b = complex(b)
    phase = complex(np.exp(1j * (a * b.conjugate()).imag))
    return phase, a + b


def rotate_displacement(g, theta):
    """Displacement after conjugation by ``R(theta)``: ``g e^{i theta}``."""
    return complex(g) * complex(np.exp(1j * theta))


def to_xp(gamma):
    gamma = np.asarray(gamma)
    return SQRT2 * gamma.real, SQRT2 * gamma.imag


def from_xp(x, p):
    return (np.asarray(x) + 1j * np.asarray(p)) / SQRT2


# --------------------------------------------------------------------------
# single Gaussian cross terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianTerm:
    """``coeff * D(gamma_l) rho_th D(gamma_r)^dagger``."""

    coeff: complex
    gamma_l: complex
    gamma_r: complex

    def conjugate_partner(self):
        return GaussianTerm(self.coeff.conjugate(), self.gamma_r, self.gamma_l)


def _term_arrays(terms, nbar, weights=None):
    """Per-term amplitude and separable-kernel parameters."""
    kappa = 2.0 * nbar + 1.0
    coeff = np.array([t.coeff for t in terms], np.complex128)
    gl = np.array([t.gamma_l for t in terms], np.complex128)
    gr = np.array([t.gamma_r for t in terms], np.complex128)
    amp = coeff * np.exp(1j * (np.conj(gr) * gl).imag) * (PREFACTOR / kappa)
    if weights is not None:
        amp = amp * weights
    mid = 0.5 * (gl + gr)
    dlt = gl - gr
    return (amp, SQRT2 * mid.real, SQRT2 * mid.imag,
            SQRT2 * dlt.real, SQRT2 * dlt.imag, kappa)


def wigner_term(term, nbar, x, p):
    """Complex Wigner value of one cross term at phase-space point(s) ``(x, p)``."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    amp, mx, mp, dx, dp, kappa = _term_arrays([term], nbar)
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    ux = x - mx[0]
    up = p - mp[0]
    val = amp[0] * np.exp(1j * (dp[0] * ux - dx[0] * up) - (ux * ux + up * up) / kappa)
    return complex(val) if val.ndim == 0 else val


def term_trace(term, nbar):
    """``Tr[coeff D(gL) rho_th D(gR)^dagger]`` in closed form."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    gl = complex(term.gamma_l)
    gr = complex(term.gamma_r)
    if gl == gr:
        return complex(term.coeff)
    d = gl - gr
    kappa = 2.0 * nbar + 1.0
    return complex(term.coeff * np.exp(1j * (gr.conjugate() * gl).imag - 0.5 * kappa * abs(d) ** 2))


# --------------------------------------------------------------------------
# factorised chains
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DisplacementChain:
    """``K rho_th(nbar) K^dagger`` with ``K`` a product of displacement factors.

    ``ops[k]`` is applied k-th (``ops[0]`` acts on the thermal state first).
    ``idle[k]`` is ``None`` for a plain displacement ``D(ops[k])`` and the
    identity amplitude ``c`` for a switchable factor ``D(ops[k]) + c``.
    """

    ops: tuple
    idle: tuple
    nbar: float

    def __post_init__(self):
        if len(self.ops) != len(self.idle):
            raise ValueError("ops and idle must have equal length")

    @property
    def kappa(self):
        return 2.0 * self.nbar + 1.0

    @property
    def switch_index(self):
        return [k for k, c in enumerate(self.idle) if c is not None]

    def displaced(self, delta):
        return DisplacementChain(self.ops + (complex(delta),), self.idle + (None,), self.nbar)

    def rotated(self, theta):
        ph = complex(np.exp(1j * theta))
        return DisplacementChain(tuple(complex(x) * ph for x in self.ops), self.idle, self.nbar)

    # -- quadratic forms over the 2K on/off indicators ---------------------

    def _quadratic(self, trace):
        x = np.array(self.ops, np.complex128)
        k = x.size
        g = np.outer(x, np.conj(x))          # g[p, q] = x_p x_q^*
        im = g.imag
        re = g.real
        c = np.zeros((2 * k, 2 * k), np.complex128)
        lower = np.tril(np.ones((k, k), bool), -1)       # q > p entries [q, p]
        # composition phases of the left and right operator products
        c[:k, :k] += np.where(lower, 1j * im, 0.0)
        c[k:, k:] += np.where(lower, -1j * im, 0.0)
        # e^{i Im(gR^* gL)}
        c[:k, k:] += 1j * im
        if trace:
            h = 0.5 * self.kappa * re
            c[:k, :k] -= h
            c[k:, k:] -= h
            c[:k, k:] += h
            c[k:, :k] += h
        else:
            c[:k, :k] += -1j * im
            c[:k, k:] += -1j * im
            c[k:, :k] += 1j * im
            c[k:, k:] += 1j * im
            h = re / (2.0 * self.kappa)
            c[:k, :k] -= h
            c[:k, k:] -= h
            c[k:, :k] -= h
            c[k:, k:] -= h
        return c

    def _reduce(self, c):
        k = len(self.ops)
        sw = self.switch_index
        fixed = [p for p in range(k) if p not in sw]
        svars = sw + [k + p for p in sw]
        fvars = fixed + [k + p for p in fixed]
        m = len(svars)
        e0 = c[np.ix_(fvars, fvars)].sum() if fvars else 0j
        base = np.empty(m, np.complex128)
        for a, i in enumerate(svars):
            base[a] = c[i, i] + (c[i, fvars].sum() + c[fvars, i].sum() if fvars else 0.0)
        q = np.zeros((m, m), np.complex128)
        for a, i in enumerate(svars):
            for b, j in enumerate(svars):
                if a != b:
                    q[a, b] = c[i, j] + c[j, i]
        idle = [complex(self.idle[p]) for p in sw]
        cs = np.array(idle + [z.conjugate() for z in idle], np.complex128)
        size = 1 << m
        omega = np.ones(size, np.complex128)
        wdir = np.ones(size, np.complex128)
        for s in range(size):
            for a in range(m):
                if not (s >> a) & 1:
                    omega[s] *= 1.0 + cs[a]
                    wdir[s] *= cs[a]
        return complex(e0), base, q, omega, wdir, svars, fixed

    def pair_scale(self):
        """Largest pair exponent; the cube route is used while this is O(1)."""
        _, _, q, _, _, _, _ = self._reduce(self._quadratic(trace=False))
        return float(np.abs(q).max()) if q.size else 0.0

    def trace(self):
        """Trace of the unnormalised operator, computed without cancellation."""
        e0, base, q, omega, wdir, _, _ = self._reduce(self._quadratic(trace=True))
        big = max(np.abs(base).max(initial=0.0), np.abs(q).max(initial=0.0))
        route = 1 if big <= 2.0 else 2
        val = kernels.cube_sum(e0, base, q, omega, wdir, route=route)
        return val

    def wigner_params(self):
        c = self._quadratic(trace=False)
        e0, base, q, omega, wdir, svars, fixed = self._reduce(c)
        k = len(self.ops)
        x = np.array(self.ops, np.complex128)
        fl = x[fixed].sum() if fixed else 0j
        fr = fl
        fp = fl + fr
        fm = fl - fr
        bx = np.array([x[i % k] for i in svars], np.complex128)
        bsgn = np.array([1.0 if i < k else -1.0 for i in svars])
        e0c = e0 + math.log(PREFACTOR / self.kappa)
        return (self.kappa, complex(e0c), fp.real, fp.imag, fm.real, fm.imag,
                bx.real.copy(), bx.imag.copy(), bsgn, base, np.expm1(q), q, omega, wdir)

    def wigner_points(self, x, p, route="auto"):
        z = from_xp(x, p)
        if route == "auto":
            r = 0 if self.pair_scale() <= CHAIN_QCAP else 2
        else:
            r = {"subset": 1, "direct": 2}[route]
        return kernels.chain_points(z.real, z.imag, self.wigner_params(), route=r)

    def branches(self):
        """``(selector, amplitude, gamma)`` for every on/off pattern of the switchable ops."""
        sw = self.switch_index
        out = []
        for sel in range(1 << len(sw)):
            amp = 1.0 + 0j
            gamma = 0j
            bit = 0
            for k, x in enumerate(self.ops):
                if self.idle[k] is not None:
                    on = (sel >> bit) & 1
                    bit += 1
                    if not on:
                        amp *= self.idle[k]
                        continue
                ph, gamma = compose_displacements(x, gamma)
                amp *= ph
            out.append((sel, amp, gamma))
        return out


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpaceState:
    """Normalised sum of Gaussian cross terms sharing one thermal occupation.

    ``chains`` optionally carries the factorised form as ``(chain, scale)``
    pairs with ``W = sum scale * W_chain``; it is what makes evaluation exact
    in the tiny-displacement regime.
    """

    terms: tuple
    nbar: float
    trace_norm: float = 1.0
    chains: tuple = field(default=())

    def __post_init__(self):
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")

    @classmethod
    def from_chains(cls, weighted):
        """Uniformly-normalised mixture of chains: ``[(chain, weight), ...]``."""
        weighted = list(weighted)
        if not weighted:
            raise ValueError("empty mixture")
        nbar = weighted[0][0].nbar
        if any(ch.nbar != nbar for ch, _ in weighted):
            raise ValueError("all chains must share nbar")
        wsum = float(sum(w for _, w in weighted))
        chains = []
        terms = []
        traces = []
        for ch, w in weighted:
            tr = ch.trace()
            if not np.isfinite(tr.real) or tr.real <= 1e-300:
                raise ZeroNormState(f"chain trace {tr!r} is not positive")
            scale = (w / wsum) / tr.real
            traces.append(tr.real)
            chains.append((ch, scale))
            br = ch.branches()
            for _, aj, gj in br:
                for _, ak, gk in br:
                    terms.append(GaussianTerm(complex(scale * aj * ak.conjugate()), gj, gk))
        trace_norm = traces[0] if len(traces) == 1 else float(sum(w * t for (_, w), t in zip(weighted, traces)) / wsum)
        return cls(tuple(terms), nbar, trace_norm, tuple(chains))

    def trace_from_terms(self):
        return sum(term_trace(t, self.nbar) for t in self.terms)

    def displaced(self, delta):
        """``D(delta) rho D(delta)^dagger``; composition phases folded into the coefficients."""
        delta = complex(delta)
        terms = []
        for t in self.terms:
            pl, gl = compose_displacements(delta, t.gamma_l)
            pr, gr = compose_displacements(delta, t.gamma_r)
            terms.append(GaussianTerm(t.coeff * pl * pr.conjugate(), gl, gr))
        chains = tuple((ch.displaced(delta), s) for ch, s in self.chains)
        return PhaseSpaceState(tuple(terms), self.nbar, self.trace_norm, chains)

    def rotated(self, theta):
        ph = complex(np.exp(1j * theta))
        terms = tuple(GaussianTerm(t.coeff, t.gamma_l * ph, t.gamma_r * ph) for t in self.terms)
        chains = tuple((ch.rotated(theta), s) for ch, s in self.chains)
        return PhaseSpaceState(terms, self.nbar, self.trace_norm, chains)

    def centers(self):
        """Distinct diagonal centres (complex amplitudes)."""
        return sorted({t.gamma_l for t in self.terms if t.gamma_l == t.gamma_r},
                      key=lambda z: (z.real, z.imag))

    def max_center(self):
        return max((abs(t.gamma_l) for t in self.terms), default=0.0)

    def max_separation(self):
        return max((abs(t.gamma_l - t.gamma_r) for t in self.terms), default=0.0)

    def use_chains(self):
        return bool(self.chains) and all(ch.pair_scale() <= CHAIN_QCAP for ch, _ in self.chains)

    def pruned(self):
        """Terms with each conjugate pair merged: ``(terms, weights)`` with W = Re sum."""
        if self.chains:
            terms, weights = [], []
            for ch, scale in self.chains:
                br = ch.branches()
                for a, (_, aj, gj) in enumerate(br):
                    terms.append(GaussianTerm(complex(scale * aj * aj.conjugate()), gj, gj))
                    weights.append(1.0)
                    for _, ak, gk in br[a + 1:]:
                        terms.append(GaussianTerm(complex(scale * aj * ak.conjugate()), gj, gk))
                        weights.append(2.0)
            return terms, np.array(weights)
        return list(self.terms), np.ones(len(self.terms))


def mixture(states, weights=None):
    """Convex combination of normalised states sharing one nbar."""
    states = list(states)
    if not states:
        raise ValueError("empty mixture")
    if weights is None:
        weights = [1.0] * len(states)
    wsum = float(sum(weights))
    nbar = states[0].nbar
    if any(s.nbar != nbar for s in states):
        raise ValueError("all states must share nbar")
    terms = []
    chains = []
    for s, w in zip(states, weights):
        f = w / wsum
        terms.extend(GaussianTerm(t.coeff * f, t.gamma_l, t.gamma_r) for t in s.terms)
        chains.extend((ch, sc * f) for ch, sc in s.chains)
    if any(not s.chains for s in states):
        chains = []
    return PhaseSpaceState(tuple(terms), nbar, 1.0, tuple(chains))


def coherent_state(gamma, nbar=0.0):
    """Displaced thermal state as a single diagonal term."""
    gamma = complex(gamma)
    ch = DisplacementChain((gamma,), (None,), float(nbar))
    return PhaseSpaceState((GaussianTerm(1.0 + 0j, gamma, gamma),), float(nbar), 1.0, ((ch, 1.0),))


# --------------------------------------------------------------------------
# reference Gaussian states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianReferenceState:
    """Coherent, thermal or squeezed-thermal reference state.

    ``squeeze_db`` reduces the variance along ``squeeze_angle`` (measured from
    the x axis) by ``10^(-dB/10)`` and raises the conjugate one by the same factor.
    """

    kind: str = "coherent"
    center: complex = 0j
    nbar: float = 0.0
    squeeze_db: float = 0.0
    squeeze_angle: float = 0.0

    def __post_init__(self):
        if self.kind not in ("coherent", "thermal", "squeezed-thermal"):
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if self.kind == "coherent" and (self.nbar != 0 or self.squeeze_db != 0):
            raise ValueError("a coherent reference has nbar = 0 and no squeezing")
        if self.kind == "thermal" and self.squeeze_db != 0:
            raise ValueError("a thermal reference has no squeezing")

    def covariance(self):
        v = (2.0 * self.nbar + 1.0) / 2.0
        s = 10.0 ** (-self.squeeze_db / 10.0)
        c, sn = math.cos(self.squeeze_angle), math.sin(self.squeeze_angle)
        rot = np.array([[c, -sn], [sn, c]])
        return rot @ np.diag([v * s, v / s]) @ rot.T

    def points(self, x, p):
        x0, p0 = to_xp(complex(self.center))
        dx = np.asarray(x, float) - x0
        dp = np.asarray(p, float) - p0
        if self.squeeze_db == 0:
            kappa = 2.0 * self.nbar + 1.0
            return (PREFACTOR / kappa) * np.exp(-(dx * dx + dp * dp) / kappa)
        cov = self.covariance()
        inv = np.linalg.inv(cov)
        q = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp * dp
        return np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(np.linalg.det(cov)))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise GridError("a grid needs at least 2 points per axis")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise GridError("grid extents must be increasing")

    @classmethod
    def square(cls, half_width, n):
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ps(self):
        return np.linspace(self.p_min, self.p_max, self.ny)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dp(self):
        return (self.p_max - self.p_min) / (self.ny - 1)

    @property
    def cell_area(self):
        return self.dx * self.dp

    def mesh(self):
        return np.meshgrid(self.xs, self.ps, indexing="ij")


@dataclass(frozen=True)
class WignerGrid:
    """Sampled ``W(x, p)``; ``values[i, j]`` is at ``(xs[i], ps[j])``."""

    spec: GridSpec
    values: np.ndarray
    imag_residual: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.spec.nx, self.spec.ny):
            raise GridError(f"values shape {self.values.shape} does not match grid")

    @property
    def cell_area(self):
        return self.spec.cell_area

    def quadrature_sum(self):
        return float(self.values.sum() * self.spec.cell_area)

    def same_grid(self, other):
        return self.spec == other.spec


def default_grid(state, refine=1.0, max_points=None, min_points=32, half_width=None):
    """Grid sized to enclose every term and resolve the finest fringes.

    Extents are ``+-max(6, R + 6 sigma)`` with ``R`` the largest centre radius
    in phase space and ``sigma = sqrt((2 nbar + 1)/2)``; spacing samples the
    shortest fringe wavelength with ``8 * refine`` points and the thermal width
    with ``6 * refine`` points.
    """
    kappa = 2.0 * state.nbar + 1.0
    sigma = math.sqrt(kappa / 2.0)
    if half_width is None:
        half_width = max(6.0, SQRT2 * state.max_center() + 6.0 * sigma)
    h = sigma / (6.0 * refine)
    sep = SQRT2 * state.max_separation()
    if sep > 0:
        h = min(h, 2.0 * math.pi / sep / (8.0 * refine))
    n = int(math.ceil(2.0 * half_width / h)) + 1
    n = max(n, min_points)
    if max_points is not None:
        n = min(n, max_points)
    return GridSpec.square(half_width, n)


def evaluate_points(state, x, p, method="auto"):
    """Complex Wigner values of ``state`` at arbitrary points."""
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    shape = np.broadcast(x, p).shape
    x, p = np.broadcast_to(x, shape).ravel(), np.broadcast_to(p, shape).ravel()
    if method == "auto":
        method = "chain" if state.use_chains() else "terms"
    if method in ("chain", "subset", "direct"):
        if not state.chains:
            raise ValueError("state has no factorised form")
        route = "auto" if method == "chain" else method
        out = np.zeros(x.size, np.complex128)
        for ch, scale in state.chains:
            out += scale * ch.wigner_points(x, p, route=route)
        return out.reshape(shape)
    if method != "terms":
        raise ValueError(f"unknown method {method!r}")
    out = np.zeros(x.size, np.complex128)
    for t in state.terms:
        out += wigner_term(t, state.nbar, x, p)
    return out.reshape(shape)


def evaluate_grid(state, spec=None, method="auto", prune=True):
    """Evaluate ``W`` on a rectangular grid.

    ``method`` is ``"auto"`` (chain route when the state carries an
    O(1)-exponent factorised form, otherwise separable term sums), ``"chain"``,
    ``"subset"``, ``"direct"`` or ``"terms"``.  With ``prune`` the term route
    merges conjugate pairs and returns the real part only.
    """
    if spec is None:
        spec = default_grid(state)
    if method == "auto":
        method = "chain" if state.use_chains() else "terms"
    if method == "terms":
        vals = _terms_on_grid(state, spec.xs, spec.ps, prune)
    else:
        xx, pp = spec.mesh()
        vals = evaluate_points(state, xx, pp, method=method)
    re = np.ascontiguousarray(vals.real)
    resid = 0.0
    if np.iscomplexobj(vals) and not (method == "terms" and prune):
        resid = float(np.abs(vals.imag).max())
    return WignerGrid(spec, re, resid)


def evaluate_axes(state, xs, ps, method="auto", prune=True):
    """Real ``W`` on the outer product ``xs`` x ``ps`` (no GridSpec needed).

    Used to stream large grids through in row blocks.
    """
    xs = np.asarray(xs, float)
    ps = np.asarray(ps, float)
    if method == "auto":
        method = "chain" if state.use_chains() else "terms"
    if method == "terms":
        return np.ascontiguousarray(_terms_on_grid(state, xs, ps, prune).real)
    xx, pp = np.meshgrid(xs, ps, indexing="ij")
    return np.ascontiguousarray(evaluate_points(state, xx, pp, method=method).real)


def _terms_on_grid(state, xs, ps, prune=True):
    if prune:
        terms, weights = state.pruned()
    else:
        terms, weights = list(state.terms), None
    amp, mx, mp, dx, dp, kappa = _term_arrays(terms, state.nbar, weights)
    return kernels.term_grid(xs, ps, amp, mx, mp, dx, dp, kappa)


def terms_on_axes(state, xs, ps, prune=True):
    """Real Wigner values on ``xs`` x ``ps`` via the separable term kernel."""
    return _terms_on_grid(state, np.asarray(xs, float), np.asarray(ps, float), prune).real


def reference_wigner(ref, spec):
    """Exact Wigner grid of a :class:`GaussianReferenceState`."""
    xx, pp = spec.mesh()
    return WignerGrid(spec, ref.points(xx, pp))
