"""Gauss-Legendre rules on a truncated half-line."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

DEFAULT_NODES = 400
# weight level at which the integration range is cut
_CUTOFF = 1e-18


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights for ∫₀^{r_max} f(r) dr."""

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise DomainError("nodes and weights must have the same shape")
        if np.any(np.diff(self.nodes) <= 0) or np.any(self.nodes <= 0):
            raise DomainError("nodes must be positive and strictly increasing")
        if np.any(self.weights <= 0):
            raise DomainError("weights must be positive")

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def radial_inner(self, f, h) -> float:
        """2π ∫ f h r dr on the rule."""
        return 2 * math.pi * float(np.sum(self.weights * f * h * self.nodes))


@lru_cache(maxsize=16)
def _legendre(n_nodes: int):
    return np.polynomial.legendre.leggauss(n_nodes)


def gauss_legendre(n_nodes: int, r_max: float) -> QuadratureRule:
    if n_nodes < 1:
        raise DomainError("need at least one node")
    if not r_max > 0:
        raise DomainError("r_max must be > 0")
    x, w = _legendre(int(n_nodes))
    return QuadratureRule(0.5 * r_max * (x + 1), 0.5 * r_max * w, float(r_max))


def gaussian_cutoff(decay: float, power: float = 0.0) -> float:
    """Radius R with exp(-decay R²) (decay R²)^power = 1e-18.

    ``power`` accounts for the polynomial prefactor of the integrand (for an
    oscillator function of index n and angular momentum l it is n + |l| + 1).
    """
    if not decay > 0:
        raise DomainError("decay must be > 0")
    target = -math.log(_CUTOFF)
    if power <= 0:
        return math.sqrt(target / decay)
    # solve t - power·log t = target on the branch t > power
    t = target + power * math.log(target + power)
    for _ in range(100):
        t_new = target + power * math.log(t)
        if abs(t_new - t) < 1e-12 * t:
            break
        t = t_new
    return math.sqrt(t / decay)


def radial_rule(decay: float, n_nodes: int = DEFAULT_NODES, power: float = 0.0) -> QuadratureRule:
    """Gauss-Legendre rule covering a Gaussian weight exp(-decay r²)."""
    return gauss_legendre(n_nodes, gaussian_cutoff(decay, power))


