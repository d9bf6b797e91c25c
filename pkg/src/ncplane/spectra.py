"""Closed-form spectra and radial eigenfunctions.

Three families live here, all with ℏ = 1:

* the commutative oscillator plus α/r² (finite-at-origin extension),
* the unperturbed noncommutative Hamiltonian H₀, which is an oscillator
  with effective mass μ, frequency Ω and a Zeeman-like term -gΩl,
* the R² observable on the noncommutative plane, with eigenvalues
  θ(2n+1+|l|-l).

Wavefunctions are radial parts only, normalised so that
2π ∫₀^∞ |ψ(r)|² r dr = 1 and positive near the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentPerturbation, DomainError
from .specfun import kummer_m_poly


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs m, ω, α, θ of the Hamiltonian."""

    m: float
    omega: float
    alpha: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"m must be > 0, got {self.m}")
        if not self.omega > 0:
            raise DomainError(f"omega must be > 0, got {self.omega}")
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if not self.theta >= 0:
            raise DomainError(f"theta must be >= 0, got {self.theta}")

    @property
    def x(self) -> float:
        """The dimensionless combination mωθ/2."""
        return 0.5 * self.m * self.omega * self.theta

    def with_theta(self, theta: float) -> "ModelParams":
        return ModelParams(self.m, self.omega, self.alpha, theta)

    def with_alpha(self, alpha: float) -> "ModelParams":
        return ModelParams(self.m, self.omega, alpha, self.theta)

    @classmethod
    def from_g(cls, g: float, m: float = 1.0, omega: float = 1.0,
               alpha: float = 0.0) -> "ModelParams":
        """Parameters with θ chosen so that the coupling g takes a given value."""
        if not 0 <= g < 1:
            raise DomainError(f"g must lie in [0, 1), got {g}")
        x = g / math.sqrt(1.0 - g * g)
        return cls(m, omega, alpha, 2.0 * x / (m * omega))


@dataclass(frozen=True)
class QuantumNumbers:
    l: int
    n: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise DomainError(f"radial index must be >= 0, got {self.n}")


@dataclass(frozen=True)
class DerivedParams:
    mu: float
    Omega: float
    g: float
    beta: float
    nu0: float
    nu1: float
    _two_m_alpha: float
    _m: float

    def nu(self, l: int) -> float:
        """ν(l) = √(l² + 2mα)."""
        return math.sqrt(l * l + self._two_m_alpha)

    def lambda_of(self, energy: float) -> float:
        return 2.0 * self._m * energy

    @property
    def mu_Omega(self) -> float:
        return self.mu * self.Omega


def derived_params(p: ModelParams) -> DerivedParams:
    x = p.x
    s = math.hypot(1.0, x)
    mu = p.m / (s * s)
    two_m_alpha = 2.0 * p.m * p.alpha
    return DerivedParams(
        mu=mu,
        Omega=p.omega * s,
        g=x / s,
        beta=p.m * p.omega,
        nu0=math.sqrt(two_m_alpha),
        nu1=math.sqrt(1.0 + two_m_alpha),
        _two_m_alpha=two_m_alpha,
        _m=p.m,
    )


def _check_n(n: int) -> None:
    if n < 0:
        raise DomainError(f"radial index must be >= 0, got {n}")


def _log_norm(beta: float, nu: float, n: int) -> float:
    # N² = β^(ν+1) Γ(n+ν+1) / (π n! Γ(ν+1)²)
    return 0.5 * ((nu + 1) * math.log(beta) + math.lgamma(n + nu + 1)
                  - math.lgamma(n + 1) - 2 * math.lgamma(nu + 1) - math.log(math.pi))


def oscillator_radial(beta: float, nu: float, n: int, r):
    """Normalised C r^ν exp(-βr²/2) M(-n, ν+1, βr²)."""
    r = np.asarray(r, dtype=float)
    t = beta * r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(r > 0, nu * np.log(np.where(r > 0, r, 1.0)),
                         0.0 if nu == 0 else -np.inf)
    log_env = _log_norm(beta, nu, n) + power - 0.5 * t
    out = np.exp(log_env) * kummer_m_poly(n, nu + 1.0, t)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# commutative problem
# ---------------------------------------------------------------------------

def commutative_energy(p: ModelParams, l: int, n: int) -> float:
    """ω(2n + 1 + √(l² + 2mα)); for l = 0 the finite-at-origin extension."""
    _check_n(n)
    return p.omega * (2 * n + 1 + derived_params(p).nu(l))


def commutative_wavefunction(p: ModelParams, q: QuantumNumbers, r):
    d = derived_params(p)
    return oscillator_radial(d.beta, d.nu(q.l), q.n, r)


def commutative_first_order(p: ModelParams, l: int) -> float:
    """First-order shift mωα/|l| of the commutative levels.

    At l = 0 the expectation value of α/r² diverges logarithmically at the
    origin, which is reported as :class:`DivergentPerturbation`.
    """
    if l == 0:
        raise DivergentPerturbation(
            "<1/r^2> diverges at r = 0 in the l = 0 sector")
    return p.m * p.omega * p.alpha / abs(l)


# ---------------------------------------------------------------------------
# noncommutative H0 and R^2
# ---------------------------------------------------------------------------

def nc_unperturbed_energy(p: ModelParams, l: int, n: int) -> float:
    """Ω(2n + 1 + |l| - g l)."""
    _check_n(n)
    d = derived_params(p)
    return d.Omega * (2 * n + 1 + abs(l) - d.g * l)


def nc_unperturbed_wavefunction(p: ModelParams, q: QuantumNumbers, r):
    d = derived_params(p)
    return oscillator_radial(d.mu_Omega, abs(q.l), q.n, r)


def _check_theta(theta: float) -> None:
    if not theta > 0:
        raise DomainError(f"theta must be > 0, got {theta}")


def r2_eigenvalue(theta: float, l: int, n: int) -> float:
    """θ(2n + 1 + |l| - l)."""
    _check_theta(theta)
    _check_n(n)
    return theta * (2 * n + 1 + abs(l) - l)


def r2_eigenfunction(theta: float, q: QuantumNumbers, r):
    """Radial eigenfunction of R²: an oscillator function with μΩ → 2/θ."""
    _check_theta(theta)
    return oscillator_radial(2.0 / theta, abs(q.l), q.n, r)
