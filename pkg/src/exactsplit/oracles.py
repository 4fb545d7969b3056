"""Independent dense and analytic references used by tests and benchmarks.

The dense route discretizes a symbol as a spectral-collocation matrix
(diagonal position factors, FFT differentiation matrices, symmetric
ordering for the mixed terms) and exponentiates it directly; grids are
kept small (<= 4096 unknowns) so a dense exponential runs in seconds.
The discrete operator only approximates the continuum one, so dense
comparisons are made on well-resolved, well-localized states.
"""

from dataclasses import dataclass

import numpy as np

from .catalog import harmonic_symbol
from .engine import Grid, StateField, _axis_view, gaussian
from .matfuncs import expm
from .program import SplittingProgram, gaussian_fourier, gaussian_x
from .symplectic import QuadraticSymbol

__all__ = [
    "DenseOperator",
    "discretize_weyl",
    "dense_semigroup",
    "harmonic_ground_state",
    "maxwellian",
    "dilated_gaussian",
    "sampled",
    "analytic_references",
    "strang_harmonic",
]

_MAX_DENSE = 4096


@dataclass(frozen=True)
class DenseOperator:
    """Spectral-collocation matrix of a quantized symbol on a small grid."""

    grid: Grid
    matrix: np.ndarray


def _derivative_1d(grid: Grid, d: int) -> np.ndarray:
    """Dense momentum matrix -i d/dx = F^{-1} diag(xi) F along axis d."""
    size = grid.sizes[d]
    xi = grid.freq(d)
    eye = np.eye(size, dtype=complex)
    return np.fft.ifft(xi[:, None] * np.fft.fft(eye, axis=0), axis=0)


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def discretize_weyl(p: QuadraticSymbol, grid: Grid) -> DenseOperator:
    """Dense matrix of p^w with symmetric ordering of x and -i d/dx.

    Mixed position/derivative terms are realized as
    (x_j P_k + P_k x_j)/2, which preserves the discrete commutator
    identity on resolved modes.  Every generator is a pure Kronecker
    product of per-dimension factors, so operator products are built
    dimension-by-dimension instead of by full-size matmuls.
    """
    if grid.ndim != p.n:
        raise ValueError("grid dimension must match the symbol")
    if grid.ndim > 2:
        raise ValueError("dense oracle supports 1-D and 2-D grids only")
    if grid.total_points() > _MAX_DENSE:
        raise ValueError(f"dense oracle capped at {_MAX_DENSE} unknowns")
    n = p.n
    total = grid.total_points()
    eyes = [np.eye(s, dtype=complex) for s in grid.sizes]

    def factors(op_index):
        mats = list(eyes)
        d = op_index % n
        if op_index < n:
            mats[d] = np.diag(grid.axis(d)).astype(complex)
        else:
            mats[d] = _derivative_1d(grid, d)
        return mats

    m = np.zeros((total, total), dtype=complex)
    for a in range(2 * n):
        fa = factors(a)
        for b in range(2 * n):
            if p.Q[a, b] != 0.0:
                fb = factors(b)
                ab = _kron_chain([x @ y for x, y in zip(fa, fb)])
                ba = _kron_chain([y @ x for x, y in zip(fa, fb)])
                m += p.Q[a, b] * 0.5 * (ab + ba)
        if p.Y[a] != 0.0:
            m += p.Y[a] * _kron_chain(fa)
    m += p.c * np.eye(total)
    return DenseOperator(grid, m)


def dense_semigroup(op: DenseOperator, t: float) -> np.ndarray:
    """Matrix e^{-t op} by scaling-and-squaring.

    The Hermitian part bounds the real spectrum (Bendixson), so a
    strongly unbounded-below discretization is rejected before it can
    overflow the exponential.
    """
    h = (op.matrix + op.matrix.conj().T) / 2.0
    lam_min = float(np.linalg.eigvalsh(h).min())
    if t * (-lam_min) > 700.0:
        raise OverflowError(
            f"e^{{-t op}} would overflow: Re spectrum reaches {lam_min:.3e} at t={t}")
    out = expm(-t * op.matrix)
    if not np.all(np.isfinite(out)):
        raise OverflowError("dense semigroup overflowed")
    return out


# ------------------------------------------------------------ references

def harmonic_ground_state(grid: Grid) -> StateField:
    """exp(-|x|^2/2): eigenstate of |x|^2 - Lap with eigenvalue n."""
    return gaussian(grid)


def maxwellian(grid: Grid) -> StateField:
    """exp(-v^2/2) with v the last coordinate, constant in the others."""
    nd = grid.ndim
    v = grid.axis(nd - 1)
    values = np.ones(grid.sizes, dtype=complex) * _axis_view(np.exp(-v * v / 2.0), nd, nd - 1)
    return StateField(grid, values)


def dilated_gaussian(grid: Grid, lam: float) -> StateField:
    """exp(-(lam x)^2 / 2) on a 1-D grid."""
    if grid.ndim != 1:
        raise ValueError("dilated_gaussian is 1-D")
    x = grid.axis(0)
    return StateField(grid, np.exp(-((lam * x) ** 2) / 2.0).astype(complex))


def sampled(grid: Grid, fn) -> StateField:
    """Evaluate a callable of the stacked coordinates on the grid."""
    mesh = np.meshgrid(*[grid.axis(d) for d in range(grid.ndim)], indexing="ij")
    return StateField(grid, np.asarray(fn(np.stack(mesh)), dtype=complex))


def analytic_references() -> dict:
    """Catalog of closed-form reference behaviors for end-to-end checks."""
    return {
        "harmonic_ground_decay": {
            "description": "exp(-|x|^2/2) decays as exp(-n t) under the harmonic semigroup",
            "initial": harmonic_ground_state,
            "factor": lambda t, n: np.exp(-n * t),
        },
        "fp_maxwellian_invariance": {
            "description": "x-independent exp(-v^2/2) is a fixed point of the "
                           "Fokker-Planck semigroup",
            "initial": maxwellian,
            "factor": lambda t: 1.0,
        },
        "kfp_maxwellian_decay": {
            "description": "x-independent exp(-v^2/2) decays as exp(-t) under KFP",
            "initial": maxwellian,
            "factor": lambda t: np.exp(-t),
        },
        "dilated_gaussian": {
            "description": "the dilatation program maps exp(-x^2/2) to exp(-(lam x)^2/2)",
            "expected": dilated_gaussian,
        },
        "rotation_radial_invariance": {
            "description": "planar rotations fix radial profiles",
            "initial": lambda grid: gaussian(grid),
        },
    }


def strang_harmonic(t: float, n: int = 1) -> SplittingProgram:
    """Second-order Strang baseline for |x|^2 - Lap (inexact on purpose).

    Same step kinds and FFT count as the exact factorization, but with
    linear sub-steps, so its flow residual scales as t^3 per step.
    """
    gx = gaussian_x(t / 2.0 * np.eye(n))
    gk = gaussian_fourier(t * np.eye(n))
    return SplittingProgram(n=n, t=t, steps=[gx, gk, gx], target=harmonic_symbol(n),
                            provenance="baseline:strang-harmonic")
