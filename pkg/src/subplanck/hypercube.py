"""Hypercube states: n rounds of "displace-or-not" followed by a rotation.

The heralded single-photon map on the mechanics is ``Y = D(i mu/sqrt2) + e^{i phi}``
(``phi = pi`` gives ``D - 1``).  A KrausSpec applies ``Y`` then ``R(theta_k)``
for ``k = 1..n``.  Pushing every rotation to the right through the
displacements gives

    Y_n = (D(b_n) + c) ... (D(b_1) + c) R(sum theta),
    b_k = i mu/sqrt2 * exp(i (theta_k + ... + theta_n)),   c = e^{i phi},

so the state is one :class:`~subplanck.core.DisplacementChain` acting on a
thermal state centred at ``initial_center * exp(i sum theta)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from subplanck import config as cfgmod
from subplanck.core import DisplacementChain, PhaseSpaceState, ZeroNormState

KRAUS_KEYS = ("n", "mu", "phi", "nbar", "step_angles", "initial_center_re", "initial_center_im")


@dataclass(frozen=True)
class KrausSpec:
    n: int
    mu: float
    phi: float = math.pi
    nbar: float = 0.0
    step_angles: tuple = None
    initial_center: complex = 0j

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("order n must be a positive integer")
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if not self.nbar >= 0:
            raise ValueError("nbar must be non-negative")
        if self.step_angles is not None:
            object.__setattr__(self, "step_angles", tuple(float(a) for a in self.step_angles))
            if len(self.step_angles) != self.n:
                raise ValueError("step_angles must have length n")

    @property
    def angles(self):
        if self.step_angles is None:
            return (math.pi / self.n,) * self.n
        return self.step_angles

    @property
    def kick(self):
        """Single-step displacement ``i mu / sqrt 2``."""
        return 1j * self.mu / math.sqrt(2.0)

    def replace(self, **kw):
        d = dict(n=self.n, mu=self.mu, phi=self.phi, nbar=self.nbar,
                 step_angles=self.step_angles, initial_center=self.initial_center)
        d.update(kw)
        return KrausSpec(**d)

    # -- config round trip --------------------------------------------------

    def to_config(self):
        out = {"n": self.n, "mu": float(self.mu), "phi": float(self.phi), "nbar": float(self.nbar)}
        if self.step_angles is not None:
            out["step_angles"] = list(self.step_angles)
        out["initial_center_re"] = float(complex(self.initial_center).real)
        out["initial_center_im"] = float(complex(self.initial_center).imag)
        return out

    @classmethod
    def from_config(cls, cfg, allow_extra=False):
        if not allow_extra:
            cfgmod.check_keys(cfg, KRAUS_KEYS)
        if "n" not in cfg or "mu" not in cfg:
            raise cfgmod.ConfigError("config needs at least 'n' and 'mu'")
        angles = cfg.get("step_angles")
        angles = cfgmod.as_float_list(angles) if angles not in (None, "") else None
        return cls(
            n=cfgmod.as_int(cfg["n"]),
            mu=cfgmod.as_float(cfg["mu"]),
            phi=cfgmod.as_float(cfg.get("phi", math.pi)),
            nbar=cfgmod.as_float(cfg.get("nbar", 0.0)),
            step_angles=angles,
            initial_center=complex(cfgmod.as_float(cfg.get("initial_center_re", 0.0)),
                                   cfgmod.as_float(cfg.get("initial_center_im", 0.0))),
        )


@dataclass(frozen=True)
class BranchTerm:
    """One operator branch of ``Y_n``: ``amplitude * D(gamma)``."""

    amplitude: complex
    gamma: complex
    selector: int
    order: int = field(default=0)

    def bits(self):
        return tuple((self.selector >> k) & 1 for k in range(self.order))


def mu_from_physical(x0, wavelength):
    """Interaction strength ``4 pi x0 / lambda``."""
    if not (x0 > 0 and wavelength > 0):
        raise ValueError("x0 and wavelength must be positive")
    return 4.0 * math.pi * x0 / wavelength


def step_displacements(spec):
    """``b_k`` for k = 1..n, in application order."""
    ang = spec.angles
    out = []
    for k in range(spec.n):
        acc = sum(ang[k:])
        out.append(spec.kick * complex(np.exp(1j * acc)))
    return out


def chain_for(spec):
    g0 = complex(spec.initial_center) * complex(np.exp(1j * sum(spec.angles)))
    c = complex(np.exp(1j * spec.phi))
    ops = (g0,) + tuple(step_displacements(spec))
    idle = (None,) + (c,) * spec.n
    return DisplacementChain(ops, idle, float(spec.nbar))


def expand_branches(spec):
    """The 2^n operator branches; bit k of ``selector`` is step k+1 displacing."""
    return [BranchTerm(complex(a), complex(g), sel, spec.n)
            for sel, a, g in chain_for(spec).branches()]


def build_state(spec):
    """Normalised hypercube state with its 4^n cross terms.

    Raises :class:`~subplanck.core.ZeroNormState` when the operator vanishes
    (e.g. ``mu = 0`` with ``phi = pi``).
    """
    if spec.mu == 0 and abs(1.0 + complex(np.exp(1j * spec.phi))) < 1e-12:
        raise ZeroNormState("the operator vanishes: mu = 0 and exp(i phi) = -1")
    return PhaseSpaceState.from_chains([(chain_for(spec), 1.0)])


def distinct_centers(spec, tol=None):
    """Cluster branch displacements; returns ``[(center, multiplicity), ...]``."""
    if tol is None:
        tol = 1e-9 * max(1.0, spec.mu)
    groups = []
    for b in expand_branches(spec):
        for g in groups:
            if abs(g[0] - b.gamma) <= tol:
                g[1] += 1
                break
        else:
            groups.append([b.gamma, 1])
    groups.sort(key=lambda g: (round(math.atan2(g[0].imag, g[0].real), 9), abs(g[0])))
    return [(complex(c), m) for c, m in groups]
