"""Error-controlled special functions: Γ, ψ, Pochhammer, Kummer M, Tricomi U, ₂F₁.

Scalar entry points return :class:`EvalResult` so callers can see how a
value was obtained.  The ``*_array`` helpers are vectorised work-horses used
by the wavefunction and kernel code, where thousands of evaluations at a
fixed parameter set are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as _sp

from .errors import DomainError

DEFAULT_TOL = 1e-12
MAX_TERMS = 10_000
MAX_DEPTH = 20

_EPS = np.finfo(float).eps
# log(1e-19): integrand cutoff used by the Laplace-type quadratures below
_LOG_CUTOFF = 44.0


@dataclass(frozen=True)
class EvalResult:
    value: float
    err_estimate: float
    terms_used: int
    converged: bool

    def __float__(self) -> float:
        return float(self.value)


def _accept(value: float, err: float, tol: float) -> bool:
    # mixed criterion: absolute near zero, relative for large values
    return err <= tol * max(1.0, abs(value))


def _rounding(abs_sum: float, k: int) -> float:
    # each term carries ~k rounding errors from the running product
    return _EPS * abs_sum * (2.0 + math.sqrt(k))


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


# ---------------------------------------------------------------------------
# Γ, ψ, Pochhammer
# ---------------------------------------------------------------------------

def ln_gamma(x: float) -> float:
    """log Γ(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def digamma(x: float) -> float:
    """ψ(x) = Γ'(x)/Γ(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"digamma requires x > 0, got {x}")
    return float(_sp.digamma(x))


def rgamma(x: float) -> float:
    """1/Γ(x), equal to zero at the poles of Γ."""
    return float(_sp.rgamma(x))


def pochhammer(c: float, n: int) -> float:
    """Rising factorial (c)_n = c(c+1)...(c+n-1) as a direct product."""
    if n < 0:
        raise DomainError(f"pochhammer requires n >= 0, got {n}")
    out = 1.0
    for k in range(n):
        out *= c + k
    return out


# ---------------------------------------------------------------------------
# Kummer M
# ---------------------------------------------------------------------------

def _check_kummer_b(a: float, b: float) -> None:
    if _is_nonpositive_int(b):
        # (b)_k vanishes at k = 1 - b; only a series that stops earlier is defined
        if not (_is_nonpositive_int(a) and -a <= -b):
            raise DomainError(f"M(a, b, z) undefined for b = {b} with a = {a}")


def kummer_m(a: float, b: float, z: float, tol: float = DEFAULT_TOL,
             max_terms: int = MAX_TERMS) -> EvalResult:
    """Kummer's function M(a, b, z) = Σ (a)_k z^k / ((b)_k k!).

    Terminating cases (a = -n) are summed exactly in n + 1 terms.  For
    z < 0 with a non-terminating series, Kummer's transformation
    M(a,b,z) = e^z M(b-a,b,-z) is used to avoid alternating cancellation.
    """
    _check_kummer_b(a, b)
    if z == 0 or a == 0:
        return EvalResult(1.0, 0.0, 1, True)
    if _is_nonpositive_int(a):
        n = int(-a)
        t, s, s_abs = 1.0, 1.0, 1.0
        for k in range(n):
            t *= (a + k) * z / ((b + k) * (k + 1))
            s += t
            s_abs += abs(t)
        return EvalResult(s, 2 * _EPS * s_abs * (n + 1), n + 1, True)
    if z < 0:
        inner = kummer_m(b - a, b, -z, tol=tol, max_terms=max_terms)
        scale = math.exp(z)
        value = scale * inner.value
        err = scale * inner.err_estimate
        return EvalResult(value, err, inner.terms_used, _accept(value, err, tol))

    t, s, s_abs = 1.0, 1.0, 1.0
    tail = math.inf
    k = 0
    while k < max_terms - 1:
        ratio = (a + k) * z / ((b + k) * (k + 1))
        t *= ratio
        s += t
        s_abs += abs(t)
        k += 1
        r_next = abs((a + k) * z / ((b + k) * (k + 1)))
        if r_next < 1 and r_next <= abs(ratio):
            tail = abs(t) * r_next / (1 - r_next)
            if _accept(s, tail + _rounding(s_abs, k), tol):
                break
    err = tail + _rounding(s_abs, k)
    return EvalResult(s, err, k + 1, _accept(s, err, tol))


def kummer_m_integral(a: float, b: float, z: float,
                      tol: float = DEFAULT_TOL) -> EvalResult:
    """M(a, b, z) from its Euler integral over t ∈ [0, 1], valid for b > a > 0.

    The endpoint singularities t^(a-1)(1-t)^(b-a-1) are handled by an
    algebraic-weight adaptive rule.
    """
    if not (a > 0 and b - a > 0):
        raise DomainError(f"integral representation needs b > a > 0, got a={a}, b={b}")
    # factor e^{z} out when z > 0 so the integrand stays O(1)
    shift = max(z, 0.0)
    val, abserr = integrate.quad(lambda t: math.exp(z * t - shift), 0.0, 1.0,
                                 weight="alg", wvar=(a - 1.0, b - a - 1.0),
                                 epsabs=0.0, epsrel=max(tol, 50 * _EPS), limit=200)
    log_pref = math.lgamma(b) - math.lgamma(a) - math.lgamma(b - a) + shift
    pref = math.exp(log_pref)
    value = pref * val
    err = pref * abserr + 4 * _EPS * abs(value)
    return EvalResult(value, err, 0, _accept(value, err, tol))


def kummer_m_array(a: float, b: float, z, max_terms: int = MAX_TERMS):
    """Vectorised M(a, b, z) for z ≥ 0 with a, b > 0 (all terms positive).

    Returns ``(values, converged_mask)``.
    """
    z = np.asarray(z, dtype=float)
    t = np.ones_like(z)
    s = np.ones_like(z)
    done = np.zeros(z.shape, dtype=bool)
    for k in range(max_terms):
        t = t * ((a + k) * z / ((b + k) * (k + 1)))
        s = s + t
        r_next = (a + k + 1) * z / ((b + k + 1) * (k + 2))
        done = (r_next < 0.5) & (t <= _EPS * 0.25 * s)
        if done.all():
            break
    return s, done


def kummer_m_poly(n: int, b: float, z):
    """M(-n, b, z) by the contiguous recurrence in n (stable Laguerre form).

    (b+k) M_{k+1} = (2k + b - z) M_k - k M_{k-1},  M_k := M(-k, b, z).
    """
    z = np.asarray(z, dtype=float)
    m_prev = np.ones_like(z)
    if n == 0:
        return m_prev
    m_curr = 1.0 - z / b
    for k in range(1, n):
        m_prev, m_curr = m_curr, ((2 * k + b - z) * m_curr - k * m_prev) / (b + k)
    return m_curr


# ---------------------------------------------------------------------------
# Tricomi U from the Laplace-type integral over t ∈ (0, ∞)
# ---------------------------------------------------------------------------
#
# Γ(a) U(a,b,z) = ∫_0^∞ t^(a-1) (1+t)^(b-a-1) e^(-z t) dt.  With z t = e^u the
# integrand becomes z^(-a) exp(a u + c log(1 + e^u / z) - e^u), c = b - a - 1,
# analytic in a strip |Im u| < π/2, so the trapezoidal sum in u converges
# geometrically in 1/h.

def _u_window(a: float, c: float, log_z_min: float) -> tuple[float, float]:
    s = a + max(c, 0.0)
    peak = s * (math.log(s) - 1.0) if s > 0 else 0.0
    u_hi = math.log(_LOG_CUTOFF + max(peak, 0.0) + 1.0)
    for _ in range(50):
        u_new = math.log(_LOG_CUTOFF + max(peak, 0.0) + s * max(u_hi, 0.0) + 1.0)
        if abs(u_new - u_hi) < 1e-12:
            break
        u_hi = u_new
    u_lo = min(log_z_min, 0.0) - (_LOG_CUTOFF + 2.0) / a
    return u_lo, u_hi + 0.5


def _laplace_log_integrand(u, a: float, c: float, log_z):
    # log of the u-integrand without the z^(-a) factor
    return a * u + c * np.logaddexp(0.0, u - log_z) - np.exp(u)


def gamma_tricomi_u_array(a: float, b: float, z, h: float = 0.125,
                          chunk: int = 1024):
    """Vectorised Γ(a)·U(a, b, z) for a > 0, z > 0 at fixed step h."""
    if not a > 0:
        raise DomainError(f"integral representation needs a > 0, got {a}")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("U(a, b, z) requires z > 0")
    c = b - a - 1.0
    flat = z.ravel()
    out = np.empty_like(flat)
    log_z_all = np.log(flat)
    u_lo, u_hi = _u_window(a, c, float(log_z_all.min()) if flat.size else 0.0)
    u = np.arange(u_lo, u_hi + h, h)
    for start in range(0, flat.size, chunk):
        log_z = log_z_all[start:start + chunk, None]
        vals = np.exp(_laplace_log_integrand(u[None, :], a, c, log_z))
        out[start:start + chunk] = h * vals.sum(axis=1) * np.exp(-a * log_z[:, 0])
    return out.reshape(z.shape)


def tricomi_u(a: float, b: float, z: float, tol: float = DEFAULT_TOL,
              max_depth: int = MAX_DEPTH) -> EvalResult:
    """Tricomi's U(a, b, z) for a > 0, z > 0 from its integral representation.

    The trapezoidal step is halved until successive sums agree to ``tol``
    (relative); ``terms_used`` reports the final number of nodes.
    """
    if not a > 0:
        raise DomainError(f"tricomi_u requires a > 0, got {a}")
    if not z > 0:
        raise DomainError(f"tricomi_u requires z > 0, got {z}")
    c = b - a - 1.0
    log_z = math.log(z)
    u_lo, u_hi = _u_window(a, c, log_z)
    h = 1.0
    u = np.arange(u_lo, u_hi + h, h)
    total = np.exp(_laplace_log_integrand(u, a, c, log_z)).sum()
    estimate = h * total
    scale = math.exp(-a * log_z - math.lgamma(a))
    err = math.inf
    depth = 0
    for depth in range(1, max_depth + 1):
        mids = u[:-1] + h / 2 if depth == 1 else np.arange(u_lo + h / 2, u_hi + h, h)
        total += np.exp(_laplace_log_integrand(mids, a, c, log_z)).sum()
        h /= 2
        new = h * total
        err = abs(new - estimate) * scale + 4 * _EPS * abs(new * scale)
        estimate = new
        if err <= tol * max(abs(estimate * scale), 1e-300) and depth >= 2:
            break
    value = estimate * scale
    n_nodes = int(round((u_hi - u_lo) / h)) + 1
    return EvalResult(value, err, n_nodes, err <= tol * max(1.0, abs(value)) or
                      err <= tol * abs(value))


# ---------------------------------------------------------------------------
# Gauss ₂F₁
# ---------------------------------------------------------------------------

def gauss_2f1(a: float, b: float, c: float, z: float, tol: float = DEFAULT_TOL,
              max_terms: int = MAX_TERMS) -> EvalResult:
    """₂F₁(a, b; c; z) by its power series for |z| < 1.

    Terminating series (a or b a non-positive integer) are polynomials and
    are accepted for any finite z.

    The tail bound uses the larger of the current term ratio and |z|, the
    limit of the ratio, once the ratio sequence is in its monotone regime.
    """
    terminating = [x for x in (a, b) if _is_nonpositive_int(x)]
    n_stop = int(-max(terminating)) if terminating else None
    if n_stop is None and not abs(z) < 1:
        raise DomainError(f"gauss_2f1 needs |z| < 1, got {z}")
    if _is_nonpositive_int(c) and (n_stop is None or n_stop > -c):
        raise DomainError(f"gauss_2f1 undefined for c = {c}")
    if z == 0:
        return EvalResult(1.0, 0.0, 1, True)
    if n_stop is not None:
        t, s, s_abs = 1.0, 1.0, 1.0
        for k in range(n_stop):
            t *= (a + k) * (b + k) * z / ((c + k) * (k + 1))
            s += t
            s_abs += abs(t)
        return EvalResult(s, 2 * _EPS * s_abs * (n_stop + 1), n_stop + 1, True)

    k_mono = int(math.ceil(2 * (abs(a) + abs(b) + abs(c) + 1)))
    t, s, s_abs = 1.0, 1.0, 1.0
    tail = math.inf
    k = 0
    while k < max_terms - 1:
        t *= (a + k) * (b + k) * z / ((c + k) * (k + 1))
        s += t
        s_abs += abs(t)
        k += 1
        if k >= k_mono:
            r = max(abs((a + k) * (b + k) * z / ((c + k) * (k + 1))), abs(z))
            if r >= 1:
                continue
            tail = abs(t) * r / (1 - r)
            if _accept(s, tail + _rounding(s_abs, k), tol):
                break
    err = tail + _rounding(s_abs, k)
    return EvalResult(s, err, k + 1, _accept(s, err, tol))


def gauss_2f1_near_unity(l_abs: int, c: float, eps: float, n_terms: int = MAX_TERMS,
                         tol: float = DEFAULT_TOL) -> EvalResult:
    """₂F₁(1+L, c; 1+c; 1-ε) from the logarithmic expansion about z = 1.

    The result is a finite ε^(-L) sum plus a series in ε^k (log ε + ψ(k+c)
    - ψ(k+1)); only the second part is truncated.  When c - L is a
    non-positive integer, 1/Γ(c-L) vanishes and the result is the finite
    sum alone.
    """
    if l_abs < 1:
        raise DomainError(f"expansion needs |l| >= 1, got {l_abs}")
    if not 0 < eps < 1:
        raise DomainError(f"expansion needs 0 < eps < 1, got {eps}")
    if not c > 0:
        raise DomainError(f"expansion needs c > 0, got {c}")
    L = int(l_abs)

    finite, t = 0.0, 1.0
    for k in range(L):
        finite += t
        if k < L - 1:
            t *= (c - L + k) * eps / (1 - L + k)
    finite *= (c / L) * eps ** (-L)

    pref = -((-1) ** L) * math.gamma(c + 1) * rgamma(c - L) / math.factorial(L)
    if pref == 0.0:
        return EvalResult(finite, 2 * _EPS * abs(finite), L, True)

    log_eps = math.log(eps)
    psi_c = float(_sp.digamma(c))
    psi_1 = -np.euler_gamma
    p = 1.0
    s, s_abs = 0.0, 0.0
    tail = math.inf
    k = 0
    while k < n_terms:
        bracket = log_eps + psi_c - psi_1
        term = p * bracket
        s += term
        s_abs += abs(term)
        psi_c += 1.0 / (k + c)
        psi_1 += 1.0 / (k + 1)
        p *= (c + k) * eps / (k + 1)
        k += 1
        r = max(eps * (c + k) / (k + 1), eps)
        if r < 1 and k > c:
            next_bracket = max(abs(log_eps + psi_c - psi_1), abs(log_eps))
            tail = abs(p) * next_bracket / (1 - r)
            if _accept(pref * s, abs(pref) * tail, tol):
                break
    value = finite + pref * s
    err = abs(pref) * tail + _rounding(abs(finite) + abs(pref) * s_abs, k)
    return EvalResult(value, err, k + L, _accept(value, err, tol))
