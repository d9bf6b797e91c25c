import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncplane.errors import NonConvergenceError, TruncationWarning
from ncplane.linalg import cholesky_solve, least_squares
from ncplane.oracle import (QuadratureRule, SymmetricMatrix, build_hamiltonian_matrix,
                            diagonalize, kernel_eigencheck, lowest_eigenvalue,
                            lowest_eigenvalues, overlap_rule, quadrature_overlap)
from ncplane.perturbation import first_order_lowest_closed, total_energy_first_order
from ncplane.quadrature import gauss_legendre, radial_rule
from ncplane.spectra import ModelParams, derived_params, nc_unperturbed_energy


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return fn(*args, **kw)


def test_symmetric_matrix_mirrors_upper_triangle():
    A = SymmetricMatrix([[1.0, 2.0], [99.0, 3.0]])
    assert A.dim == 2
    assert_allclose(A.entries, [[1, 2], [2, 3]])


def test_diagonalize_examples():
    assert_allclose(diagonalize(SymmetricMatrix(np.diag([3.0, -1.0, 2.0]))), [-1, 2, 3])
    a, b = 1.7, -0.4
    assert_allclose(diagonalize(SymmetricMatrix([[a, b], [b, a]])), [a - abs(b), a + abs(b)],
                    rtol=1e-15)
    rng = np.random.default_rng(3)
    M = rng.normal(size=(30, 30))
    M = M + M.T
    ev = diagonalize(SymmetricMatrix(M))
    assert np.all(np.diff(ev) >= 0)
    assert abs(ev.sum() - np.trace(M)) <= 1e-10 * np.linalg.norm(M)
    assert_allclose(ev, np.linalg.eigvalsh(M), atol=1e-12 * np.linalg.norm(M))


def test_diagonalize_graded_matrix():
    # entries spanning many scales, as in the truncated Hamiltonian
    d = np.geomspace(1e-8, 1e4, 12)
    M = np.diag(d) + 1e-9 * np.ones((12, 12))
    # Jacobi stops on an off-diagonal norm, so accuracy is relative to ‖A‖
    assert_allclose(diagonalize(SymmetricMatrix(M)), np.linalg.eigvalsh(M),
                    atol=1e-14 * np.linalg.norm(M))


def test_jacobi_iteration_limit():
    from ncplane.linalg import jacobi_eigenvalues
    rng = np.random.default_rng(0)
    M = rng.normal(size=(20, 20))
    with pytest.raises(NonConvergenceError):
        jacobi_eigenvalues(SymmetricMatrix(M + M.T), max_sweeps=1)


def test_linear_solvers():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    assert_allclose(A @ cholesky_solve(A, np.array([1.0, 2.0])), [1, 2], rtol=1e-14)
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    assert_allclose(least_squares(X, 2 + 3 * np.arange(5.0)), [2, 3], rtol=1e-13)


def test_quadrature_rule_contract():
    r = gauss_legendre(50, 3.0)
    assert isinstance(r, QuadratureRule)
    assert np.all(np.diff(r.nodes) > 0) and np.all(r.weights > 0)
    assert abs(r.weights.sum() - 3.0) <= 1e-12
    with pytest.raises(ValueError):
        QuadratureRule(np.array([1.0, 0.5]), np.array([1.0, 1.0]), 2.0)


def test_quadrature_overlap_rule_independence():
    # the rule built for (n, np) and for (np, n) gives the same number
    p = ModelParams.from_g(0.5)
    for l in (-2, 0, 3):
        assert_allclose(quadrature_overlap(p, l, 2, 5),
                        quadrature_overlap(p, l, 2, 5, overlap_rule(p, l, 5, 2)), atol=1e-14)


def test_quadrature_overlap_example():
    p = ModelParams.from_g(0.5)
    assert_allclose(quadrature_overlap(p, 1, 0, 0), 8 / 9, rtol=1e-12)


def test_hamiltonian_alpha_zero_is_diagonal():
    p = ModelParams(1.0, 1.0, 0.0, 0.3)
    H = build_hamiltonian_matrix(p, -1, 6)
    want = [nc_unperturbed_energy(p, -1, n) for n in range(6)]
    assert_allclose(H.entries, np.diag(want))


def test_hamiltonian_spd_and_lowest_entry():
    p = ModelParams.from_g(0.5, alpha=0.05)
    for l in (-1, 0, 2):
        H = build_hamiltonian_matrix(p, l, 12)
        assert_allclose(H.entries, H.entries.T, atol=0)
        assert diagonalize(H)[0] > 0
        H1 = build_hamiltonian_matrix(p, l, 1, 400)
        want = nc_unperturbed_energy(p, l, 0) + first_order_lowest_closed(p, l)
        assert_allclose(H1.entries[0, 0], want, rtol=1e-12)


def test_truncation_warning():
    p = ModelParams.from_g(0.1, alpha=0.05)
    with pytest.warns(TruncationWarning):
        build_hamiltonian_matrix(p, 0, 4, 4)
    H, tails = quiet(build_hamiltonian_matrix, p, 0, 4, 4, return_tails=True)
    assert tails.shape == (4, 4) and tails.max() > 1e-12
    with pytest.raises(ValueError):
        build_hamiltonian_matrix(p, 0, 4, 2)


def _size_gap(g, l, N, alpha=0.1):
    p = ModelParams.from_g(g, alpha=alpha)
    a = quiet(lowest_eigenvalue, p, l, N)
    b = quiet(lowest_eigenvalue, p, l, 2 * N)
    return abs(a - b) / derived_params(p).Omega


@pytest.mark.parametrize("g", [0.15, 0.3, 0.5, 0.9])
@pytest.mark.parametrize("l", [-1, 0, 2])
def test_truncation_convergence(g, l):
    assert _size_gap(g, l, 20) <= 1e-8


@pytest.mark.parametrize("l", [0, 2])
@pytest.mark.xfail(strict=True, reason="at g = 0.1, alpha = 0.1 twenty H0 levels are too few")
def test_truncation_convergence_n20_small_g(l):
    assert _size_gap(0.1, l, 20) <= 1e-8


@pytest.mark.parametrize("l", [-1, 0, 2])
def test_truncation_convergence_n40_small_g(l):
    assert _size_gap(0.1, l, 40) <= 1e-8


@pytest.mark.parametrize("g", [0.3, 0.7])
def test_variational_bound_and_ordering(g):
    for a in (1e-3, 0.02, 0.1):
        p = ModelParams.from_g(g, alpha=a)
        low = {l: quiet(lowest_eigenvalue, p, l, 20) for l in (-2, -1, 0, 1, 2)}
        for l, e in low.items():
            assert e <= total_energy_first_order(p, l, 0) + 1e-12
        assert low[1] < low[-1]


def test_lowest_eigenvalues_sorted():
    p = ModelParams.from_g(0.4, alpha=0.05)
    ev = quiet(lowest_eigenvalues, p, 1, 20, count=5)
    assert ev.size == 5 and np.all(np.diff(ev) > 0)
    # levels stay above their unperturbed values
    e0 = [nc_unperturbed_energy(p, 1, n) for n in range(5)]
    assert np.all(ev > e0)


def test_second_order_residual():
    p = ModelParams.from_g(0.5)
    alphas = np.array([1e-4, 1e-3, 1e-2])
    res = [total_energy_first_order(p.with_alpha(a), 0, 0)
           - quiet(lowest_eigenvalue, p.with_alpha(a), 0, 40, 160) for a in alphas]
    assert np.all(np.asarray(res) > 0)
    slope = np.polyfit(np.log(alphas), np.log(res), 1)[0]
    assert abs(slope - 2) < 0.05


def test_kernel_eigencheck():
    p = ModelParams(1.0, 1.0, 0.1, 0.6)
    for l in (-3, 0, 2):
        for n in (0, 5, 8):
            assert kernel_eigencheck(p, l, n) <= 1e-6
    assert kernel_eigencheck(p.with_alpha(0.0), 1, 2) == 0.0


def test_kernel_eigencheck_refines_with_nodes():
    p = ModelParams(1.0, 1.0, 0.1, 0.6)
    res = [kernel_eigencheck(p, 1, 3, radial_rule(2 / p.theta, k, power=5))
           for k in (4, 8, 100, 200, 400)]
    assert res[0] > 100 * res[1]
    # past a handful of panels the residual sits at the special-function floor
    assert max(res[2:]) <= 1e-9
    assert res[4] <= 1.1 * res[2]
