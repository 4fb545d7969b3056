"""Dense matrix functions shared across the package.

The exponential is scaling-and-squaring with Pade(13) (scipy), the
logarithm is inverse scaling-and-squaring restricted to the principal
branch, and the entire functions (e^z-1)/z and (e^z-1-z)/z^2 are
evaluated with the same Pade machinery on an augmented block matrix
instead of truncated power series, which keeps them accurate for
arguments of any size.
"""

import numpy as np
import scipy.linalg


class BranchCutError(ValueError):
    """Principal matrix logarithm rejected: spectrum touches R_-."""


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a square (real or complex) matrix."""
    return scipy.linalg.expm(np.asarray(a))


def logm_principal(a: np.ndarray, axis_tol: float = 1e-8) -> np.ndarray:
    """Principal matrix logarithm with a branch-cut guard.

    Raises
    ------
    BranchCutError
        If an eigenvalue lies within ``axis_tol`` (relative to its
        modulus) of the closed negative real axis, where the principal
        branch is undefined or numerically meaningless.
    """
    a = np.asarray(a)
    w = np.linalg.eigvals(a)
    mod = np.maximum(np.abs(w), 1e-300)
    bad = (w.real <= 0.0) & (np.abs(w.imag) <= axis_tol * mod)
    if np.any(bad):
        raise BranchCutError(
            f"matrix log undefined: eigenvalue(s) {w[bad]} on/near the negative real axis"
        )
    out = scipy.linalg.logm(a)
    if np.isrealobj(a) and np.abs(out.imag).max(initial=0.0) < 1e-12 * max(1.0, np.abs(out).max()):
        out = out.real
    return out


def phi1(a: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z applied to a square matrix, via one augmented expm."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    blk = np.zeros((2 * d, 2 * d), dtype=complex)
    blk[:d, :d] = a
    blk[:d, d:] = np.eye(d)
    return scipy.linalg.expm(blk)[:d, d:]


def phi2(a: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2 applied to a square matrix, via one augmented expm."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    blk = np.zeros((3 * d, 3 * d), dtype=complex)
    blk[:d, :d] = a
    blk[:d, d:2 * d] = np.eye(d)
    blk[d:2 * d, 2 * d:] = np.eye(d)
    return scipy.linalg.expm(blk)[:d, 2 * d:]
