"""First-order corrections in α from the spectral resolution of α/R².

The correction to a level of H₀ is

    ΔE_{l,n} = Σ_k (α / ρ²_{l,k}) ⟨Ψ⁰_{l,n} | Υ_{l,k}⟩²,

where Υ are the R² eigenfunctions.  With q = (1-g)/(1+g) the overlaps are

    ⟨Ψ⁰_{l,n}|Υ_{l,k}⟩ = √((4g)^{a+1}/(1+g)^{2a+2} · (n+a)!(k+a)!/(n! k! a!²))
                          · qⁿ (-q)^k ₂F₁(-k, -n; 1+a; -4g/(1-g)²),   a = |l|.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonConvergenceError
from .spectra import ModelParams, derived_params, nc_unperturbed_energy
from .specfun import (DEFAULT_TOL, MAX_TERMS, EvalResult, gauss_2f1,
                      gauss_2f1_near_unity)

_EPS = np.finfo(float).eps
# argument of the closed-form ₂F₁ beyond which the expansion about 1 is used
NEAR_UNITY_SWITCH = 0.9


class Method(enum.Enum):
    SERIES = "series"
    CLOSED_FORM = "closed_form"
    BOTH = "both"


@dataclass(frozen=True)
class CorrectionResult:
    first_order: float
    series_value: EvalResult
    closed_form: float | None
    method: Method


def coupling(p: ModelParams) -> float:
    if not p.theta > 0:
        raise DomainError("theta must be > 0; use the commutative formulas at theta = 0")
    return derived_params(p).g


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------

def _log_anchor(g: float, a: int, n: int) -> float:
    return 0.5 * ((a + 1) * math.log(4 * g) - (2 * a + 2) * math.log1p(g)
                  + math.lgamma(n + a + 1) - math.lgamma(n + 1) - math.lgamma(a + 1))


def _column_lowest(g: float, a: int, K: int) -> np.ndarray:
    q = (1 - g) / (1 + g)
    k = np.arange(K + 1)
    log_binom = np.array([math.lgamma(j + a + 1) - math.lgamma(j + 1) for j in k]) \
        - math.lgamma(a + 1)
    mag = np.exp(_log_anchor(g, a, 0) + k * math.log(q) + 0.5 * log_binom)
    return np.where(k % 2 == 0, mag, -mag)


def _recurrence(g: float, a: int, n: int):
    q = (1 - g) / (1 + g)
    c = q * q
    beta = 1 + a

    def A(k):
        return (c - 1) * n + k + (k + beta) * c

    def rho(k):
        return -q * math.sqrt((k + a) / k)

    return q, c, beta, A, rho


@lru_cache(maxsize=1024)
def _turning_points(g: float, a: int, n: int) -> tuple[int, int]:
    """First and last k at which the overlap recurrence is oscillatory."""
    if n == 0:
        return 0, 0
    q, c, beta, A, rho = _recurrence(g, a, n)

    def oscillatory(k):
        al = rho(k + 1) * A(k) / (c * (k + beta))
        be = rho(k + 1) * k * rho(k) / (c * (k + beta))
        return al * al < 4 * be

    # below k_minus the wanted solution grows and forward recursion is stable
    scan = 4 * (n + a + 2) + int(4 * (n + a + 1) / (1 - c))
    km = next((k for k in range(1, scan) if oscillatory(k)), n)
    kp = km
    step = max(1, km // 4)
    while oscillatory(kp + step):
        kp += step
    return km, kp


@lru_cache(maxsize=512)
def _column_cached(g: float, a: int, n: int, K: int) -> np.ndarray:
    if n == 0:
        out = _column_lowest(g, a, K)
        out.setflags(write=False)
        return out

    q, c, beta, A, rho = _recurrence(g, a, n)
    km, kp = _turning_points(g, a, n)

    fw = np.zeros(max(km, 1) + 1)
    fw[0] = math.exp(_log_anchor(g, a, n) + n * math.log(q))
    fw[1] = fw[0] * rho(1) * (1 - n * (1 - c) / (c * (1 + a)))
    for k in range(1, km):
        fw[k + 1] = rho(k + 1) / (c * (k + beta)) * (A(k) * fw[k] - k * rho(k) * fw[k - 1])

    base = max(K, km, kp, 1)
    top = base + 10
    # past the turning point the column decays like q^k k^(n+a); start the
    # backward sweep deep enough that the start-up error is below 1e-40
    while 2 * (top - base) * (-math.log(q)) - (n + a + 2) * math.log(top / base) < 40 * math.log(10):
        top += max(10, top // 10)

    fb = np.zeros(top + 2)
    fb[top] = 1.0
    for k in range(top, km, -1):
        fb[k - 1] = (A(k) * fb[k] - fb[k + 1] * c * (k + beta) / rho(k + 1)) / (k * rho(k))
        if abs(fb[k - 1]) > 1e150:
            fb[k - 1:] *= 1e-150
    lo = max(km - 1, 0)
    scale = np.dot(fb[lo:km + 1], fw[lo:km + 1]) / np.dot(fb[lo:km + 1], fb[lo:km + 1])
    out = np.concatenate([fw[:km + 1], fb[km + 1:] * scale])[:K + 1]
    if out.size < K + 1:
        out = np.concatenate([out, np.zeros(K + 1 - out.size)])
    out.setflags(write=False)
    return out


def overlap_column(g: float, l: int, n: int, K: int) -> np.ndarray:
    """Overlaps ⟨Ψ⁰_{l,n}|Υ_{l,k}⟩ for k = 0..K at coupling g ∈ (0, 1).

    Evaluated from the three-term recurrence in k: forward from the exact
    k = 0, 1 values while the column grows, then by Miller's backward
    recursion through the oscillatory and decaying regions, matched at the
    first oscillatory index.  Summing the ₂F₁ polynomial directly loses all
    accuracy at small g and large n.
    """
    if not 0 < g < 1:
        raise DomainError(f"g must lie in (0, 1), got {g}")
    if n < 0 or K < 0:
        raise DomainError("indices must be >= 0")
    return _column_cached(float(g), abs(int(l)), int(n), int(K))


def overlap(p: ModelParams, l: int, n: int, np_: int) -> float:
    """⟨Ψ⁰_{l,n}|Υ_{l,np}⟩ with both functions positive at the origin."""
    if np_ < 0 or n < 0:
        raise DomainError("indices must be >= 0")
    g = coupling(p)
    return float(overlap_column(g, l, n, np_)[np_])


def overlap_closed_form(p: ModelParams, l: int, n: int, np_: int) -> float:
    """The same overlap from the terminating ₂F₁ polynomial (small n only)."""
    g = coupling(p)
    a = abs(l)
    q = (1 - g) / (1 + g)
    log_pref = 0.5 * ((a + 1) * math.log(4 * g) - (2 * a + 2) * math.log1p(g)
                      + math.lgamma(n + a + 1) + math.lgamma(np_ + a + 1)
                      - math.lgamma(n + 1) - math.lgamma(np_ + 1) - 2 * math.lgamma(a + 1))
    f = gauss_2f1(-np_, -n, 1 + a, -4 * g / (1 - g) ** 2).value
    return math.exp(log_pref + (n + np_) * math.log(q)) * (-1) ** np_ * f


# ---------------------------------------------------------------------------
# first-order sums
# ---------------------------------------------------------------------------

def _rho2(theta: float, l: int, k: np.ndarray) -> np.ndarray:
    return theta * (2 * k + 1 + abs(l) - l)


def first_order_series(p: ModelParams, l: int, n: int, tol: float = DEFAULT_TOL,
                       max_terms: int = MAX_TERMS) -> EvalResult:
    """Σ_k (α/ρ²_{l,k}) overlap², truncated by a geometric tail bound.

    Once the terms decrease, the tail is bounded by t_K r/(1-r) with r the
    larger of the last term ratio and q², the asymptotic ratio.
    """
    g = coupling(p)
    if n < 0:
        raise DomainError("n must be >= 0")
    if p.alpha == 0:
        return EvalResult(0.0, 0.0, 1, True)
    q2 = ((1 - g) / (1 + g)) ** 2
    # past the last turning point the terms decay monotonically
    kp = _turning_points(float(g), abs(int(l)), int(n))[1]
    K = min(max(64, 2 * kp + 32), max_terms - 1)
    while True:
        col = overlap_column(g, l, n, K)
        terms = p.alpha / _rho2(p.theta, l, np.arange(K + 1)) * col * col
        partial = np.cumsum(terms)
        ratios = terms[1:] / np.where(terms[:-1] > 0, terms[:-1], np.inf)
        r = np.maximum(ratios, q2)
        # monotone-decay regime: ratio below one from here to the end of the block
        decaying = r < 1
        tails = np.where(decaying, terms[1:] * r / np.where(decaying, 1 - r, 1.0), np.inf)
        last_bad = np.nonzero(~decaying)[0]
        start = max(last_bad[-1] + 1 if last_bad.size else 0, kp)
        rounding = 2 * _EPS * partial[1:] * np.sqrt(np.arange(2, K + 2))
        ok = (tails + rounding <= tol * np.maximum(partial[1:], 1e-300))
        ok[:start] = False
        idx = np.nonzero(ok)[0]
        if idx.size:
            j = idx[0]
            return EvalResult(float(partial[j + 1]), float(tails[j] + rounding[j]), int(j + 2), True)
        if K >= max_terms - 1:
            j = K - 1
            err = float(tails[j] + rounding[j]) if np.isfinite(tails[j]) else math.inf
            return EvalResult(float(partial[-1]), err, K + 1, False)
        K = min(2 * K, max_terms - 1)


def closed_form_hypergeometric(g: float, l: int) -> EvalResult:
    """₂F₁(1+|l|, c; 1+c; q²), c = (1+|l|-l)/2, switching to the expansion about 1."""
    L = abs(l)
    c = 0.5 * (1 + L - l)
    q2 = ((1 - g) / (1 + g)) ** 2
    if q2 > NEAR_UNITY_SWITCH:
        # ε = 1 - q² computed without cancellation
        return gauss_2f1_near_unity(L, c, 4 * g / (1 + g) ** 2)
    return gauss_2f1(1 + L, c, 1 + c, q2)


def first_order_lowest_closed(p: ModelParams, l: int) -> float:
    """Closed form of the first-order shift of the lowest level in sector l."""
    g = coupling(p)
    d = derived_params(p)
    amo = p.alpha * d.mu_Omega
    if l == 0:
        return -amo * math.log(g) / ((1 - g) * (1 + g))
    L = abs(l)
    F = closed_form_hypergeometric(g, l)
    if not F.converged:
        raise NonConvergenceError(f"closed-form 2F1 did not converge (err {F.err_estimate:g})")
    # (4g)^L / (1+g)^(2L) written as ε^L
    eps = 4 * g / (1 + g) ** 2
    return 2 * amo * eps ** L / ((1 + L - l) * (1 + g) ** 2) * F.value


def first_order_correction(p: ModelParams, l: int, n: int, tol: float = DEFAULT_TOL,
                           max_terms: int = MAX_TERMS) -> CorrectionResult:
    series = first_order_series(p, l, n, tol=tol, max_terms=max_terms)
    if n == 0:
        closed = first_order_lowest_closed(p, l)
        return CorrectionResult(closed, series, closed, Method.BOTH)
    return CorrectionResult(series.value, series, None, Method.SERIES)


def total_energy_first_order(p: ModelParams, l: int, n: int, tol: float = DEFAULT_TOL,
                             max_terms: int = MAX_TERMS) -> float:
    """E⁰_{l,n} + ΔE_{l,n}; raises NonConvergenceError if the series stalls."""
    e0 = nc_unperturbed_energy(p, l, n)
    if p.alpha == 0:
        return e0
    if n == 0:
        return e0 + first_order_lowest_closed(p, l)
    s = first_order_series(p, l, n, tol=tol, max_terms=max_terms)
    if not s.converged:
        raise NonConvergenceError(
            f"first-order series for (l={l}, n={n}) not converged in {s.terms_used} terms")
    return e0 + s.value


def small_theta_energy(p: ModelParams, l: int) -> float:
    """Small-θ approximation to the lowest level of sector l, to first order in α.

    Valid for mωθ ≪ 1.  For |l| = 1 the θ log θ term appears; for l = 0 the
    shift itself carries -αmω log θ.  At θ = 0 the |l| ≥ 1 values reduce to
    the commutative ones and l = 0 returns +inf.
    """
    m, w, a = p.m, p.omega, p.alpha
    x = p.x
    L = abs(l)
    s = 1 if l > 0 else -1
    if l == 0:
        if x == 0:
            return math.inf if a > 0 else w
        h = math.hypot(1.0, x)
        return w * h * (1 - a * m * math.log(x / h))
    if L == 1:
        log_term = (math.log(x) + 1) * x if x > 0 else 0.0
        return w * (2 + a * m - s * x - s * 2 * a * m * log_term)
    return w * (1 + L + a * m / L - s * L * x + s * 2 * a * m * x / (L - 1))
