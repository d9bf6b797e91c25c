"""Integral kernels: the inverse of R² in a sector and the commutative resolvent.

Both kernels are separable,

    K(r, r') = P · φ(min(r, r')) · χ(max(r, r')),

with φ built from Kummer's M (regular at the origin) and χ from Tricomi's U
(decaying at infinity).  The kernels act on radial functions with the measure
r' dr' (no angular 2π).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .linalg import least_squares
from .quadrature import QuadratureRule
from .spectra import ModelParams, derived_params, r2_eigenvalue
from .specfun import gamma_tricomi_u_array, kummer_m_array, kummer_m_integral

# the Kummer series is abandoned for the integral representation beyond this
SERIES_TERM_LIMIT = 500


class KernelKind(enum.Enum):
    INVERSE_R2 = "inverse_r2"
    COMMUTATIVE_RESOLVENT = "commutative_resolvent"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    l: int
    params: ModelParams
    lambda0: float = 0.0

    def __post_init__(self):
        if self.kind is KernelKind.COMMUTATIVE_RESOLVENT:
            resolvent_window(self.params, self.lambda0)
        elif not self.params.theta > 0:
            raise DomainError("the inverse-R² kernel needs theta > 0")


@dataclass(frozen=True)
class Separable:
    """K(r, r') = prefactor · phi(r_<) · chi(r_>)."""

    prefactor: float
    phi: Callable[[np.ndarray], np.ndarray]
    chi: Callable[[np.ndarray], np.ndarray]

    def __call__(self, r, rp):
        r, rp = np.broadcast_arrays(np.asarray(r, float), np.asarray(rp, float))
        lo, hi = np.minimum(r, rp), np.maximum(r, rp)
        out = self.prefactor * self.phi(lo) * self.chi(hi)
        return out if out.ndim else float(out)


def _kummer_positive(a: float, b: float, z: np.ndarray) -> np.ndarray:
    vals, ok = kummer_m_array(a, b, z, max_terms=SERIES_TERM_LIMIT)
    if not ok.all():
        for idx in zip(*np.nonzero(~ok)):
            vals[idx] = kummer_m_integral(a, b, float(z[idx])).value
    return vals


def _branch_pair(a: float, b: float, scale: float, power: float):
    # φ(r) = r^power e^{-t/2} M(a, b, t),  χ(r) = r^power e^{-t/2} Γ(a) U(a, b, t)
    # with t = scale · r²
    def phi(r):
        r = np.asarray(r, float)
        t = scale * r * r
        return r ** power * np.exp(-0.5 * t) * _kummer_positive(a, b, t)

    def chi(r):
        r = np.asarray(r, float)
        t = scale * r * r
        return r ** power * np.exp(-0.5 * t) * gamma_tricomi_u_array(a, b, t)

    return phi, chi


def inverse_r2_separable(p: ModelParams, l: int) -> Separable:
    if not p.theta > 0:
        raise DomainError(f"theta must be > 0, got {p.theta}")
    L = abs(l)
    a = 0.5 + 0.5 * L - 0.5 * l
    theta = p.theta
    # Γ(a) is folded into the U factor
    log_pref = (L + 1) * math.log(2.0) - (L + 2) * math.log(theta) - math.lgamma(L + 1)
    phi, chi = _branch_pair(a, L + 1.0, 2.0 / theta, L)
    return Separable(p.alpha * math.exp(log_pref), phi, chi)


def inverse_r2_kernel(p: ModelParams, l: int, r, rp):
    """Green kernel of α/R² in sector l; symmetric by construction."""
    return inverse_r2_separable(p, l)(r, rp)


def resolvent_window(p: ModelParams, lambda0: float) -> tuple[float, float]:
    """Open interval of λ₀ on which the resolvent kernel is defined."""
    nu1 = derived_params(p).nu1
    lo, hi = -p.omega * (nu1 - 1.0), p.omega * (nu1 + 1.0)
    if not lo < lambda0 < hi:
        raise DomainError(f"lambda0 = {lambda0} outside the window ({lo}, {hi})")
    return lo, hi


def resolvent_separable(p: ModelParams, lambda0: float) -> Separable:
    resolvent_window(p, lambda0)
    nu1 = derived_params(p).nu1
    a = 0.5 * (nu1 + 1.0) - lambda0 / (2.0 * p.omega)
    log_pref = nu1 * math.log(p.omega) + (nu1 + 1) * math.log(p.m) - math.lgamma(nu1 + 1)
    phi, chi = _branch_pair(a, nu1 + 1.0, p.m * p.omega, nu1)
    return Separable(math.exp(log_pref), phi, chi)


def resolvent_kernel_commutative(p: ModelParams, lambda0: float, r, rp):
    """Kernel of (H + α/r² - λ₀)⁻¹ in the commutative l = ±1 sector."""
    return resolvent_separable(p, lambda0)(r, rp)


def separable_for(spec: KernelSpec) -> Separable:
    if spec.kind is KernelKind.INVERSE_R2:
        return inverse_r2_separable(spec.params, spec.l)
    return resolvent_separable(spec.params, spec.lambda0)


_GL8 = np.polynomial.legendre.leggauss(8)


def apply_kernel(spec: KernelSpec, f, quad: QuadratureRule) -> np.ndarray:
    """(K f)(r_i) = ∫₀^{r_max} K(r_i, x) f(x) x dx on the rule's nodes.

    For an array ``f`` (samples on the nodes) the rule is applied directly.
    For a callable ``f`` the kink of K at x = r_i is respected: the integral
    is split at every node and each panel gets its own 8-point rule, with
    the separable structure turning the sum into two cumulative integrals.
    """
    sep = separable_for(spec)
    x = quad.nodes
    if not callable(f):
        f = np.asarray(f, float)
        # nodes are sorted, so K_ij = P φ_min(i,j) χ_max(i,j)
        phi, chi = sep.phi(x), sep.chi(x)
        i, j = np.indices((x.size, x.size))
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        K = sep.prefactor * phi[lo] * chi[hi]
        return K @ (quad.weights * f * x)

    edges = np.concatenate([[0.0], x, [quad.r_max]])
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t, w = _GL8
    pts = mid[:, None] + half[:, None] * t[None, :]
    wts = half[:, None] * w[None, :]
    flat = pts.ravel()
    fx = np.asarray(f(flat), float) * flat
    phi_int = (wts.ravel() * sep.phi(flat) * fx).reshape(pts.shape).sum(axis=1)
    chi_int = (wts.ravel() * sep.chi(flat) * fx).reshape(pts.shape).sum(axis=1)
    # panel j spans [edges[j], edges[j+1]]; node i sits at edges[i+1]
    below = np.cumsum(phi_int)[:-1]
    above = np.cumsum(chi_int[::-1])[::-1][1:]
    return sep.prefactor * (sep.chi(x) * below + sep.phi(x) * above)


def operator_norm_bound(p: ModelParams, l: int) -> float:
    """Largest eigenvalue α/ρ²_{l,0} of α/R² in sector l; never above α/θ."""
    return p.alpha / r2_eigenvalue(p.theta, l, 0)


def alpha_smoothness_fit(r: float, rp: float, lambda0: float, m: float = 1.0,
                         omega: float = 1.0, alpha_max: float = 0.05,
                         degree: int = 4, points: int = 21):
    """Polynomial fit of α ↦ G(r, r', λ₀) and its residual relative to the value range.

    Returns ``(alphas, values, max_residual / range)``.
    """
    alphas = np.linspace(0.0, alpha_max, points)
    vals = np.array([float(resolvent_kernel_commutative(ModelParams(m, omega, a, 0.0),
                                                         lambda0, r, rp)) for a in alphas])
    s = 2.0 * alphas / alpha_max - 1.0
    X = np.vander(s, degree + 1, increasing=True)
    coef = least_squares(X, vals)
    resid = np.max(np.abs(X @ coef - vals))
    span = np.ptp(vals)
    return alphas, vals, (resid / span if span > 0 else 0.0)
