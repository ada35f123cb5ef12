"""Brute-force reference in a truncated number basis.

Deliberately independent of :mod:`subplanck.core`: displacements are matrix
exponentials of the truncated generator, the Kraus string is applied as
matrices step by step, and Wigner values come from the standard Laguerre-type
recursion over ``rho_mn``.  Used to validate the analytic engine.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from subplanck import kernels
from subplanck.core import GridSpec, WignerGrid


class CutoffTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class FockDensityMatrix:
    """Density matrix on levels ``0..cutoff``."""

    cutoff: int
    elements: np.ndarray

    def __post_init__(self):
        if self.elements.shape != (self.cutoff + 1, self.cutoff + 1):
            raise ValueError("elements must be (cutoff+1) x (cutoff+1)")

    def trace(self):
        return complex(np.trace(self.elements))

    def purity(self):
        return float(np.real(np.trace(self.elements @ self.elements)))

    def populations(self):
        return np.real(np.diag(self.elements))

    def tail_population(self, margin=5):
        return float(self.populations()[self.cutoff - margin + 1:].sum())


def annihilation(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def fock_displacement(beta, cutoff):
    """``expm(beta b^dagger - beta^* b)`` on levels ``0..cutoff``."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    b = annihilation(cutoff)
    beta = complex(beta)
    return expm(beta * b.conj().T - beta.conjugate() * b)


def fock_rotation(theta, cutoff):
    """``exp(i theta b^dagger b)``."""
    return np.diag(np.exp(1j * theta * np.arange(cutoff + 1)))


def fock_thermal(nbar, cutoff):
    pop = np.zeros(cutoff + 1)
    if nbar == 0:
        pop[0] = 1.0
    else:
        q = nbar / (nbar + 1.0)
        pop = (1.0 - q) * q ** np.arange(cutoff + 1)
        pop /= pop.sum()
    return np.diag(pop).astype(complex)


def suggest_cutoff(spec, sigmas=10.0):
    """Cutoff large enough for the branch centres and thermal tail of ``spec``."""
    # brute-force centres from the same operator string, no core algebra
    kick = 1j * spec.mu / math.sqrt(2.0)
    angles = spec.angles
    steps = [kick * np.exp(1j * sum(angles[k:])) for k in range(spec.n)]
    c0 = complex(spec.initial_center) * np.exp(1j * sum(angles))
    rmax = 0.0
    for sel in range(1 << spec.n):
        g = c0 + sum(steps[k] for k in range(spec.n) if (sel >> k) & 1)
        rmax = max(rmax, abs(g))
    nb = spec.nbar
    mean = rmax ** 2 + nb
    std = math.sqrt(rmax ** 2 * (2 * nb + 1) + nb * (nb + 1))
    n_est = mean + sigmas * std + 4.0 * sigmas
    if nb > 0:
        q = nb / (nb + 1.0)
        n_est = max(n_est, math.log(1e-13) / math.log(q) + rmax ** 2)
    return int(math.ceil(n_est)) + 10


def fock_build(spec, cutoff=None, guard=1e-8):
    """Apply ``spec``'s Kraus string to the thermal input as matrices."""
    if spec.nbar > 50:
        raise ValueError("the Fock oracle is limited to nbar <= 50")
    if cutoff is None:
        cutoff = suggest_cutoff(spec)
    rho = fock_thermal(spec.nbar, cutoff)
    if spec.initial_center != 0:
        d0 = fock_displacement(spec.initial_center, cutoff)
        rho = d0 @ rho @ d0.conj().T
    kick = fock_displacement(1j * spec.mu / math.sqrt(2.0), cutoff)
    upsilon = kick + np.exp(1j * spec.phi) * np.eye(cutoff + 1)
    for theta in spec.angles:
        rho = upsilon @ rho @ upsilon.conj().T
        r = fock_rotation(theta, cutoff)
        rho = r @ rho @ r.conj().T
    tr = np.trace(rho).real
    if not tr > 0:
        raise ValueError("operator string annihilated the state")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    out = FockDensityMatrix(cutoff, rho)
    tail = out.tail_population()
    if tail > guard:
        raise CutoffTooSmall(f"population {tail:.2e} above level {cutoff - 5} at cutoff {cutoff}")
    return out


def coherent_density(alpha, cutoff):
    d = fock_displacement(alpha, cutoff)
    v = d[:, 0]
    return FockDensityMatrix(cutoff, np.outer(v, v.conj()))


def number_density(k, cutoff):
    rho = np.zeros((cutoff + 1, cutoff + 1), complex)
    rho[k, k] = 1.0
    return FockDensityMatrix(cutoff, rho)


def fock_wigner_points(rho, x, p):
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    shape = np.broadcast(x, p).shape
    zr = np.broadcast_to(x, shape).ravel() / math.sqrt(2.0)
    zi = np.broadcast_to(p, shape).ravel() / math.sqrt(2.0)
    return kernels.fock_wigner_points(rho.elements, zr, zi).reshape(shape)


def fock_wigner(rho, spec):
    """Wigner grid of a number-basis density matrix."""
    if not isinstance(spec, GridSpec):
        raise TypeError("spec must be a GridSpec")
    xx, pp = spec.mesh()
    return WignerGrid(spec, fock_wigner_points(rho, xx, pp))
