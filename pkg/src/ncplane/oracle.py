"""Independent checks: quadrature overlaps and truncated-matrix diagonalisation.

The truncated Hamiltonian lives in the H₀ eigenbasis, so H₀ is exactly
diagonal and α/R² enters through its spectral resolution in the R² basis:

    H_nm = δ_nm E⁰_{l,n} + Σ_{k<Np} O_{nk} (α/ρ²_{l,k}) O_{mk}.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import TruncationWarning
from .kernels import KernelKind, KernelSpec, apply_kernel
from .linalg import SymmetricMatrix, jacobi_eigenvalues
from .perturbation import coupling, overlap_column
from .quadrature import QuadratureRule, radial_rule
from .spectra import (ModelParams, QuantumNumbers, derived_params,
                      nc_unperturbed_energy, nc_unperturbed_wavefunction,
                      r2_eigenfunction, r2_eigenvalue)

__all__ = [
    "QuadratureRule", "SymmetricMatrix", "diagonalize", "quadrature_overlap",
    "overlap_rule", "build_hamiltonian_matrix", "lowest_eigenvalues",
    "lowest_eigenvalue", "kernel_eigencheck", "TAIL_THRESHOLD",
]

TAIL_THRESHOLD = 1e-12


def diagonalize(a: SymmetricMatrix) -> np.ndarray:
    """Eigenvalues in ascending order (cyclic Jacobi)."""
    return jacobi_eigenvalues(a)


def overlap_rule(p: ModelParams, l: int, n: int, np_: int, n_nodes: int = 400) -> QuadratureRule:
    """A rule resolving the product Ψ⁰_{l,n} Υ_{l,np}."""
    d = derived_params(p)
    decay = 0.5 * (d.mu_Omega + 2.0 / p.theta)
    return radial_rule(decay, n_nodes, power=n + np_ + abs(l) + 1)


def quadrature_overlap(p: ModelParams, l: int, n: int, np_: int,
                       rule: QuadratureRule | None = None) -> float:
    """2π Σ_j w_j Ψ⁰_{l,n}(x_j) Υ_{l,np}(x_j) x_j."""
    if rule is None:
        rule = overlap_rule(p, l, n, np_)
    x = rule.nodes
    psi = nc_unperturbed_wavefunction(p, QuantumNumbers(l, n), x)
    ups = r2_eigenfunction(p.theta, QuantumNumbers(l, np_), x)
    return rule.radial_inner(psi, ups)


def build_hamiltonian_matrix(p: ModelParams, l: int, N: int, Np: int | None = None,
                             return_tails: bool = False):
    """Truncated H₀ + α/R² in sector l on the lowest N levels of H₀.

    The inner resolution is cut at Np R² levels (default 4N).  Because
    α/ρ²_k decreases in k, the diagonal tail is at most
    (α/ρ²_{Np}) (1 - Σ_{k<Np} O²_{nk}); off-diagonal tails follow by
    Cauchy-Schwarz.  A :class:`TruncationWarning` is issued when any tail
    bound exceeds ``TAIL_THRESHOLD``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    Np = 4 * N if Np is None else Np
    if Np < N:
        raise ValueError("Np must be >= N")
    e0 = np.array([nc_unperturbed_energy(p, l, n) for n in range(N)])
    if p.alpha == 0:
        H = SymmetricMatrix(np.diag(e0))
        return (H, np.zeros((N, N))) if return_tails else H
    g = coupling(p)
    O = np.array([overlap_column(g, l, n, Np - 1) for n in range(N)])
    v = p.alpha / np.array([r2_eigenvalue(p.theta, l, k) for k in range(Np)])
    H = np.diag(e0) + (O * v) @ O.T
    missing = np.clip(1.0 - np.sum(O * O, axis=1), 0.0, None)
    diag_tail = p.alpha / r2_eigenvalue(p.theta, l, Np) * missing
    tails = np.sqrt(np.outer(diag_tail, diag_tail))
    worst = float(tails.max())
    if worst > TAIL_THRESHOLD:
        warnings.warn(f"spectral tail bound {worst:.3g} exceeds {TAIL_THRESHOLD:g} "
                      f"(l={l}, N={N}, Np={Np}); raise Np", TruncationWarning, stacklevel=2)
    M = SymmetricMatrix(H)
    return (M, tails) if return_tails else M


def lowest_eigenvalues(p: ModelParams, l: int, N: int, Np: int | None = None,
                       count: int = 1) -> np.ndarray:
    return diagonalize(build_hamiltonian_matrix(p, l, N, Np))[:count]


def lowest_eigenvalue(p: ModelParams, l: int, N: int = 40, Np: int | None = None) -> float:
    return float(lowest_eigenvalues(p, l, N, Np)[0])


def kernel_eigencheck(p: ModelParams, l: int, n: int, rule: QuadratureRule | None = None) -> float:
    """Max-norm relative residual of the Green kernel acting on Υ_{l,n}.

    Checks ∫ G_l(r, r') Υ_{l,n}(r') r' dr' = (α/ρ²_{l,n}) Υ_{l,n}(r) on the
    rule's nodes.  Returns 0 when α = 0, where both sides vanish.
    """
    if p.alpha == 0:
        return 0.0
    if rule is None:
        rule = radial_rule(2.0 / p.theta, power=n + abs(l) + 1)
    q = QuantumNumbers(l, n)

    def ups(r):
        return r2_eigenfunction(p.theta, q, r)

    spec = KernelSpec(KernelKind.INVERSE_R2, l, p)
    lhs = apply_kernel(spec, ups, rule)
    rhs = p.alpha / r2_eigenvalue(p.theta, l, n) * ups(rule.nodes)
    scale = float(np.max(np.abs(rhs)))
    return float(np.max(np.abs(lhs - rhs))) / scale if scale > 0 else math.inf
