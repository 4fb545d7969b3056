"""Shared oracles for the test suite.

The dense affine oracle builds the full (2n+2)-dimensional flow of a
homogenized symbol by a direct matrix exponential and reorders it into
the block basis, independently of the block formulas under test.
"""

import numpy as np
import pytest
from scipy.linalg import expm as scipy_expm

from exactsplit.symplectic import (
    QuadraticSymbol,
    appendix_permutation,
    canonical_j,
    homogenize,
)


def dense_affine_matrix(p: QuadraticSymbol, t: float) -> np.ndarray:
    """(2n+2)-flow of the homogenized symbol, reordered blockwise."""
    qh = homogenize(p)
    flow = scipy_expm(-2j * t * (canonical_j(p.n + 1) @ qh.Q))
    perm = appendix_permutation(p.n)
    return flow[np.ix_(perm, perm)]


def expm_eig(m: np.ndarray) -> np.ndarray:
    """Eigendecomposition-based exponential (independent of Pade)."""
    w, v = np.linalg.eig(np.asarray(m, dtype=complex))
    return v @ np.diag(np.exp(w)) @ np.linalg.inv(v)


def random_symbol(rng, n, scale=1.0, real=False, linear=True, const=True) -> QuadraticSymbol:
    q = rng.normal(size=(2 * n, 2 * n))
    if not real:
        q = q + 1j * rng.normal(size=(2 * n, 2 * n))
    q = scale * (q + q.T) / 2.0
    y = rng.normal(size=2 * n) + (0 if real else 1j * rng.normal(size=2 * n))
    c = rng.normal() + (0 if real else 1j * rng.normal())
    if not linear:
        y = np.zeros(2 * n)
    if not const:
        c = 0.0
    return QuadraticSymbol(n, q.astype(complex), y.astype(complex), complex(c))


def localized_test_vectors(rng, grid, count=4):
    """Well-resolved, well-localized states: Gaussians times low-order
    polynomial and plane-wave factors, far from boundary and Nyquist."""
    x = grid.axis(0)
    out = []
    for _ in range(count):
        x0 = rng.uniform(-0.5, 0.5)
        sig = rng.uniform(0.9, 1.05)
        k = rng.uniform(-1.5, 1.5)
        a = rng.normal() + 1j * rng.normal()
        vec = (1.0 + a * (x - x0)) * np.exp(-((x - x0) ** 2) / (2 * sig ** 2) + 1j * k * x)
        out.append(vec)
    return out


def commutator_residual(p1, p2, grid, vectors):
    """Relative defect of [p1^w, p2^w] + i {p1,p2}^w on test vectors."""
    from exactsplit.oracles import discretize_weyl
    from exactsplit.symplectic import poisson_bracket

    a = discretize_weyl(p1, grid).matrix
    b = discretize_weyl(p2, grid).matrix
    br = discretize_weyl(poisson_bracket(p1, p2), grid).matrix
    comm = a @ b - b @ a
    worst = 0.0
    for v in vectors:
        lhs = comm @ v
        rhs = -1j * (br @ v)
        scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-30)
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def dense_affine():
    return dense_affine_matrix


@pytest.fixture
def make_symbol():
    return random_symbol
