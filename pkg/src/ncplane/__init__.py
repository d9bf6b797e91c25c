"""Spectrum of a particle on the noncommutative plane in a harmonic plus α/r² potential."""

from .errors import (DivergentPerturbation, DomainError, NonConvergenceError,
                     RankDeficiencyError, TruncationWarning)
from .kernels import (KernelKind, KernelSpec, apply_kernel, inverse_r2_kernel,
                      resolvent_kernel_commutative)
from .linalg import SymmetricMatrix
from .oracle import (build_hamiltonian_matrix, diagonalize, kernel_eigencheck,
                     lowest_eigenvalue, quadrature_overlap)
from .perturbation import (CorrectionResult, Method, first_order_correction,
                           first_order_lowest_closed, overlap, small_theta_energy,
                           total_energy_first_order)
from .quadrature import QuadratureRule, gauss_legendre, radial_rule
from .specfun import (EvalResult, digamma, gauss_2f1, gauss_2f1_near_unity,
                      kummer_m, ln_gamma, pochhammer, tricomi_u)
from .spectra import (DerivedParams, ModelParams, QuantumNumbers,
                      commutative_energy, commutative_first_order,
                      commutative_wavefunction, derived_params,
                      nc_unperturbed_energy, nc_unperturbed_wavefunction,
                      r2_eigenfunction, r2_eigenvalue)

__version__ = "0.1.0"
