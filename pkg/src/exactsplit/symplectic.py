"""Phase-space linear algebra for polynomial symbols of degree two or less.

Conventions used everywhere in this package:

* coordinates are stored in the order ``(x_1..x_n, xi_1..xi_n)``;
* ``J`` is the canonical symplectic matrix ``[[0, I], [-I, 0]]``;
* the Hamiltonian flow of a quadratic form with matrix ``Q`` at time
  ``t`` is ``exp(-2j*t*J@Q)``;
* the Poisson bracket is
  ``{p1,p2} = sum_j d_{xi_j}p1 d_{x_j}p2 - d_{x_j}p1 d_{xi_j}p2``,
  so that in particular ``{x, xi} = -1``.

The homogenization map sends a symbol ``p = X^T Q X + Y^T X + c`` on
C^{2n} to the quadratic form ``X^T Q X + (Y^T X) x_{n+1} + c x_{n+1}^2``
on C^{2n+2}.  Affine flows are the flows of homogenized symbols, stored
through their three independent blocks in the reordered basis
``(x_1..x_n, xi_1..xi_n, x_{n+1}, xi_{n+1})``, in which the (2n+2)-flow
of ``p = q + l + c`` reads::

    [ Phi_t^q                      -i*t*Ups@J@L   0 ]
    [ 0                             1             0 ]
    [ i*t*L@Ups   t^2*L@Theta@J@L + 2i*t*c        1 ]

with ``Ups = phi1(-2i*t*J*Q)``, ``Theta = phi2(-2i*t*J*Q)`` and ``L``
the row vector of the linear part.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .matfuncs import expm, phi1, phi2

__all__ = [
    "SymbolAsymmetryWarning",
    "NotBoundedBelowError",
    "SeriesDivergenceError",
    "canonical_j",
    "QuadraticSymbol",
    "FlowMatrix",
    "AffineFlow",
    "poisson_bracket",
    "hamiltonian_flow",
    "homogenize",
    "appendix_permutation",
    "affine_flow",
    "compose_affine",
    "kappa_series",
    "is_nonneg_symplectic",
    "lower_bound_decompose",
    "transport_symbol",
    "build_symbol",
]


class SymbolAsymmetryWarning(UserWarning):
    """Emitted when an ingested Q matrix is symmetrized beyond 1e-13."""


class NotBoundedBelowError(ValueError):
    """Raised when a real symbol has no finite infimum on R^{2n}."""


class SeriesDivergenceError(ValueError):
    """Raised when the kappa power series loses all significant digits."""


def canonical_j(n: int) -> np.ndarray:
    """The 2n x 2n matrix [[0, I], [-I, 0]] of the symplectic form."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


@dataclass(frozen=True)
class QuadraticSymbol:
    """A polynomial p(X) = X^T Q X + Y^T X + c of degree <= 2 on C^{2n}.

    ``Q`` is symmetrized on construction; asymmetry above 1e-13
    (relative) triggers a :class:`SymbolAsymmetryWarning`.
    """

    n: int
    Q: np.ndarray
    Y: np.ndarray
    c: complex

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("symbol dimension must be >= 1")
        q = np.array(self.Q, dtype=complex)
        y = np.array(self.Y, dtype=complex).reshape(-1)
        if q.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"Q must be {2*self.n}x{2*self.n}, got {q.shape}")
        if y.shape != (2 * self.n,):
            raise ValueError(f"Y must have length {2*self.n}, got {y.shape}")
        asym = np.abs(q - q.T).max(initial=0.0)
        if asym > 1e-13 * max(1.0, np.abs(q).max(initial=0.0)):
            warnings.warn(
                f"Q symmetrized on ingest (asymmetry {asym:.2e})",
                SymbolAsymmetryWarning,
            )
        q = (q + q.T) / 2.0
        q.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "Y", y)
        object.__setattr__(self, "c", complex(self.c))

    # -- constructors ------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "QuadraticSymbol":
        return cls(n, np.zeros((2 * n, 2 * n)), np.zeros(2 * n), 0.0)

    @classmethod
    def constant(cls, n: int, c: complex) -> "QuadraticSymbol":
        return cls(n, np.zeros((2 * n, 2 * n)), np.zeros(2 * n), c)

    # -- basic algebra -----------------------------------------------
    def evaluate(self, x) -> complex:
        x = np.asarray(x, dtype=complex)
        return complex(x @ self.Q @ x + self.Y @ x + self.c)

    def scaled(self, s: complex) -> "QuadraticSymbol":
        return QuadraticSymbol(self.n, s * self.Q, s * self.Y, s * self.c)

    def __add__(self, other: "QuadraticSymbol") -> "QuadraticSymbol":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return QuadraticSymbol(self.n, self.Q + other.Q, self.Y + other.Y, self.c + other.c)

    def quadratic_part(self) -> "QuadraticSymbol":
        return QuadraticSymbol(self.n, self.Q, np.zeros(2 * self.n), 0.0)

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, np.abs(self.Q).max(initial=0.0), np.abs(self.Y).max(initial=0.0), abs(self.c))
        return (
            np.abs(self.Q.imag).max(initial=0.0) <= tol * scale
            and np.abs(self.Y.imag).max(initial=0.0) <= tol * scale
            and abs(self.c.imag) <= tol * scale
        )

    # -- serialization -----------------------------------------------
    def to_record(self) -> dict:
        """Structured record {n, Q_re, Q_im, Y_re, Y_im, c_re, c_im}, row-major."""
        return {
            "n": self.n,
            "Q_re": self.Q.real.tolist(),
            "Q_im": self.Q.imag.tolist(),
            "Y_re": self.Y.real.tolist(),
            "Y_im": self.Y.imag.tolist(),
            "c_re": self.c.real,
            "c_im": self.c.imag,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "QuadraticSymbol":
        n = int(rec["n"])
        q = np.array(rec["Q_re"], dtype=float) + 1j * np.array(rec["Q_im"], dtype=float)
        y = np.array(rec["Y_re"], dtype=float) + 1j * np.array(rec["Y_im"], dtype=float)
        return cls(n, q, y, complex(rec["c_re"], rec["c_im"]))


def build_symbol(n, xx=None, xixi=None, cross=None, yx=None, yxi=None, c=0.0) -> QuadraticSymbol:
    """Assemble a symbol from n x n blocks.

    ``xx`` and ``xixi`` are the symmetric matrices of the x- and
    xi-quadratic parts, ``cross`` is the matrix M of the term
    ``(M x) . xi``, and ``yx``/``yxi`` are the linear coefficients.
    """
    Q = np.zeros((2 * n, 2 * n), dtype=complex)
    if xx is not None:
        Q[:n, :n] = xx
    if xixi is not None:
        Q[n:, n:] = xixi
    if cross is not None:
        m = np.asarray(cross, dtype=complex)
        Q[n:, :n] += m / 2.0
        Q[:n, n:] += m.T / 2.0
    Y = np.zeros(2 * n, dtype=complex)
    if yx is not None:
        Y[:n] = yx
    if yxi is not None:
        Y[n:] = yxi
    return QuadraticSymbol(n, Q, Y, c)


def transport_symbol(m: np.ndarray) -> QuadraticSymbol:
    """Symbol p with e^{-t p^w} = e^{t M x . grad} for trace-free M.

    ``p = -i (M x) . xi``; its flow is blockdiag(e^{-tM}, e^{t M^T}).
    """
    m = np.asarray(m, dtype=float)
    return build_symbol(m.shape[0], cross=-1j * m)


@dataclass(frozen=True)
class FlowMatrix:
    """A 2n x 2n complex matrix representing a Hamiltonian flow."""

    n: int
    M: np.ndarray

    def __post_init__(self):
        m = np.array(self.M, dtype=complex)
        if m.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"flow matrix must be {2*self.n}x{2*self.n}")
        m.flags.writeable = False
        object.__setattr__(self, "M", m)

    def symplecticity_residual(self) -> float:
        j = canonical_j(self.n)
        return float(np.linalg.norm(self.M.T @ j @ self.M - j))

    def is_symplectic(self, rel_tol: float = 1e-10) -> bool:
        return self.symplecticity_residual() <= rel_tol * np.linalg.norm(self.M) ** 2

    @classmethod
    def identity(cls, n: int) -> "FlowMatrix":
        return cls(n, np.eye(2 * n, dtype=complex))


def poisson_bracket(p1: QuadraticSymbol, p2: QuadraticSymbol) -> QuadraticSymbol:
    """Canonical Poisson bracket of two degree <= 2 symbols.

    With gradients ``grad p = 2QX + Y`` the bracket is the closed-form
    ``{p1,p2} = -(grad p1)^T J (grad p2)``; the result has degree <= 2.
    """
    if p1.n != p2.n:
        raise ValueError("dimension mismatch")
    j = canonical_j(p1.n)
    q = -2.0 * (p1.Q @ j @ p2.Q - p2.Q @ j @ p1.Q)
    y = -2.0 * (p1.Q @ j @ p2.Y) + 2.0 * (p2.Q @ j @ p1.Y)
    c = -complex(p1.Y @ j @ p2.Y)
    return QuadraticSymbol(p1.n, q, y, c)


def hamiltonian_flow(q: QuadraticSymbol, t: float) -> FlowMatrix:
    """Flow e^{-2itJQ} of the quadratic part of ``q`` (Y and c ignored)."""
    if not np.isfinite(t):
        raise ValueError("flow time must be finite")
    j = canonical_j(q.n)
    return FlowMatrix(q.n, expm(-2j * t * (j @ q.Q)))


def homogenize(p: QuadraticSymbol) -> QuadraticSymbol:
    """Quadratic form on C^{2n+2}: X^T Q X + (Y^T X) x_{n+1} + c x_{n+1}^2.

    The output uses canonical coordinates (x_1..x_{n+1}, xi_1..xi_{n+1});
    use :func:`appendix_permutation` to reorder matrices into the basis
    (x_1..x_n, xi_1..xi_n, x_{n+1}, xi_{n+1}).
    """
    n = p.n
    m = 2 * n + 2
    old = np.arange(2 * n)
    new = np.where(old < n, old, old + 1)
    qh = np.zeros((m, m), dtype=complex)
    qh[np.ix_(new, new)] = p.Q
    qh[new, n] += p.Y / 2.0
    qh[n, new] += p.Y / 2.0
    qh[n, n] += p.c
    return QuadraticSymbol(n + 1, qh, np.zeros(m), 0.0)


def appendix_permutation(n: int) -> np.ndarray:
    """Index array mapping canonical (2n+2)-coordinates to the order
    (x_1..x_n, xi_1..xi_n, x_{n+1}, xi_{n+1})."""
    return np.array(list(range(n)) + list(range(n + 1, 2 * n + 1)) + [n, 2 * n + 1])


@dataclass(frozen=True)
class AffineFlow:
    """Blocks (1,1), (3,1), (3,2) of a homogenized flow (see module doc).

    ``linear`` is the 2n x 2n flow of the quadratic part, ``shift`` the
    row block coupling the phase row to phase space, and ``phase`` the
    scalar block accumulating constants and cross terms.  The remaining
    nontrivial block (1,2) is determined by symplecticity and exposed
    as :meth:`column_block`.
    """

    n: int
    linear: np.ndarray
    shift: np.ndarray
    phase: complex

    def __post_init__(self):
        lin = np.array(self.linear, dtype=complex)
        sh = np.array(self.shift, dtype=complex).reshape(-1)
        if lin.shape != (2 * self.n, 2 * self.n) or sh.shape != (2 * self.n,):
            raise ValueError("inconsistent affine flow blocks")
        lin.flags.writeable = False
        sh.flags.writeable = False
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "shift", sh)
        object.__setattr__(self, "phase", complex(self.phase))

    @classmethod
    def identity(cls, n: int) -> "AffineFlow":
        return cls(n, np.eye(2 * n, dtype=complex), np.zeros(2 * n, dtype=complex), 0.0)

    def column_block(self) -> np.ndarray:
        # symplecticity of the (2n+2)-flow forces B = -A J r^T
        return -self.linear @ canonical_j(self.n) @ self.shift

    def full_matrix(self) -> np.ndarray:
        """The (2n+2) x (2n+2) matrix in the reordered basis."""
        m = 2 * self.n
        out = np.eye(m + 2, dtype=complex)
        out[:m, :m] = self.linear
        out[:m, m] = self.column_block()
        out[m + 1, :m] = self.shift
        out[m + 1, m] = self.phase
        return out


def affine_flow(p: QuadraticSymbol, t: float) -> AffineFlow:
    """Affine flow of the homogenized symbol at time ``t``.

    Equals the corresponding blocks of ``expm(-2itJ_{2n+2} mat(Pp))``;
    the phi-functions are evaluated by augmented Pade exponentials, so
    there is no series truncation involved.
    """
    if not np.isfinite(t):
        raise ValueError("flow time must be finite")
    j = canonical_j(p.n)
    gen = -2j * t * (j @ p.Q)
    lin = expm(gen)
    ups = phi1(gen)
    theta = phi2(gen)
    shift = 1j * t * (ups.T @ p.Y)
    phase = t * t * (p.Y @ theta @ j @ p.Y) + 2j * t * p.c
    return AffineFlow(p.n, lin, shift, phase)


def _compose2(f: AffineFlow, g: AffineFlow) -> AffineFlow:
    if f.n != g.n:
        raise ValueError("dimension mismatch")
    bg = g.column_block()
    return AffineFlow(
        f.n,
        f.linear @ g.linear,
        f.shift @ g.linear + g.shift,
        complex(f.shift @ bg) + f.phase + g.phase,
    )


def compose_affine(flows) -> AffineFlow:
    """Compose affine flows as matrix products, left factor first."""
    flows = list(flows)
    if not flows:
        raise ValueError("nothing to compose")
    acc = flows[0]
    for f in flows[1:]:
        acc = _compose2(acc, f)
    return acc


def kappa_series(p: QuadraticSymbol, t: float, max_terms: int = 64,
                 growth_limit: float = 1e12) -> complex:
    """Phase constant kappa from its power series (cross-check path).

    kappa_t = sum_k 4^k t^{2k+3} / (2k+3)! * q((JQ)^k J Y); equal to
    ``-i/2 * t^2 * Y @ Theta @ J @ Y`` computed by :func:`affine_flow`.
    Raises :class:`SeriesDivergenceError` when intermediate terms exceed
    ``growth_limit`` times the current sum, which signals catastrophic
    cancellation for very large ``t*Q``.
    """
    import math

    j = canonical_j(p.n)
    jq = j @ p.Q
    v = j @ p.Y
    total = 0.0 + 0.0j
    peak = 0.0
    for k in range(max_terms):
        term = 4.0 ** k * t ** (2 * k + 3) / math.factorial(2 * k + 3) * (v @ p.Q @ v)
        total += term
        peak = max(peak, abs(term))
        if abs(term) < 1e-18 * max(peak, 1e-300):
            break
        v = jq @ v
    if peak > growth_limit * max(abs(total), 1e-300):
        raise SeriesDivergenceError(
            f"kappa series ill-conditioned (peak term {peak:.2e} vs sum {abs(total):.2e})"
        )
    return total


def is_nonneg_symplectic(flow, tol: float = 1e-10):
    """Membership test for Sp+ (nonnegative complex symplectic matrices).

    Returns ``(ok, margin)`` where ``margin`` is the minimum eigenvalue
    of the Hermitian matrix ``T^* (-iJ) T - (-iJ)``; ``ok`` requires the
    symplecticity residual <= tol * ||T||_F^2 and ``margin >= -tol``.
    """
    if isinstance(flow, FlowMatrix):
        t_mat, n = flow.M, flow.n
    else:
        t_mat = np.asarray(flow, dtype=complex)
        n = t_mat.shape[0] // 2
    j = canonical_j(n)
    sympl = np.linalg.norm(t_mat.T @ j @ t_mat - j)
    herm = t_mat.conj().T @ (-1j * j) @ t_mat - (-1j * j)
    margin = float(np.linalg.eigvalsh((herm + herm.conj().T) / 2.0).min())
    ok = sympl <= tol * max(1.0, np.linalg.norm(t_mat) ** 2) and margin >= -tol
    return ok, margin


def lower_bound_decompose(p: QuadraticSymbol, tol: float = 1e-9):
    """Write a real bounded-below symbol as p(X) = q(X - Y) + c.

    Returns ``(q, Y, c)`` with ``q`` the (nonnegative) quadratic part,
    ``Y`` a real shift solving the normal equations ``Q Y = -Z/2`` and
    ``c = p(Y)``.  Raises :class:`NotBoundedBelowError` when Q has an
    eigenvalue below ``-tol`` or the linear part has a component in
    ker Q above tolerance.
    """
    if not p.is_real():
        raise ValueError("lower_bound_decompose requires a real symbol")
    q_mat = p.Q.real
    z = p.Y.real
    scale = max(1.0, np.abs(q_mat).max(initial=0.0), np.abs(z).max(initial=0.0))
    eigs = np.linalg.eigvalsh(q_mat)
    if eigs.min(initial=0.0) < -tol * scale:
        raise NotBoundedBelowError(f"quadratic part has negative eigenvalue {eigs.min():.2e}")
    y, *_ = np.linalg.lstsq(q_mat, -z / 2.0, rcond=None)
    if np.linalg.norm(q_mat @ y + z / 2.0) > tol * scale:
        raise NotBoundedBelowError("linear part has a component in ker Q: not bounded below")
    c = p.evaluate(y).real
    q_sym = QuadraticSymbol(p.n, q_mat, np.zeros(2 * p.n), 0.0)
    return q_sym, y, c
