"""Closed-form exact splittings, emitted as verified SplittingPrograms.

Every constructor returns a program whose factor flows reproduce the
target flow exactly (up to roundoff); construction runs the phase-space
verification and refuses to return a program with residual above
1e-10.  Step lists are in execution order (first applied first), i.e.
reversed with respect to the operator-product notation.
"""

import math

import numpy as np

from . import program as prg
from .program import SplittingProgram
from .solver import verify_program
from .symplectic import (
    NotBoundedBelowError,
    QuadraticSymbol,
    build_symbol,
    transport_symbol,
)

__all__ = [
    "SingularParameterError",
    "ProgramConstructionError",
    "harmonic_symbol",
    "harmonic_oscillator",
    "rotation2d",
    "dilatation_steps",
    "dilatation",
    "reflection1d",
    "shear_factorize",
    "rotation_nd",
    "fokker_planck_symbol",
    "fokker_planck_matrix",
    "fokker_planck_det",
    "fokker_planck",
    "kfp_symbol",
    "kfp_matrix",
    "kfp_det",
    "kramers_fokker_planck",
    "affine_linear_split",
    "translate_conjugate_split",
    "factor_symbol",
]


class SingularParameterError(ValueError):
    """Parameter at/near a pole of the splitting coefficients.

    ``suggested`` carries the largest safe parameter (callers subdivide).
    """

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class ProgramConstructionError(RuntimeError):
    """A catalog program failed its construction-time flow verification."""


def _finish(prog: SplittingProgram, verify: bool, tol: float = 1e-10) -> SplittingProgram:
    if verify:
        report = verify_program(prog, tol=tol)
        if not report.ok:
            raise ProgramConstructionError(
                f"{prog.provenance}: flow residual {report.residual:.3e} > {tol:.1e}"
            )
    return prog


# ---------------------------------------------------------------- harmonic

def harmonic_symbol(n: int) -> QuadraticSymbol:
    """Symbol |x|^2 + |xi|^2, whose quantization is |x|^2 - Laplacian."""
    return build_symbol(n, xx=np.eye(n), xixi=np.eye(n))


def harmonic_oscillator(t: float, n: int = 1, verify: bool = True) -> SplittingProgram:
    """Three-step exact factorization of e^{-t(|x|^2 - Laplacian)}.

    Gaussian-in-x with tanh(t)/2, Gaussian Fourier multiplier with
    sinh(2t)/2, Gaussian-in-x again; exact for every t >= 0.
    """
    if t < 0:
        raise ValueError("harmonic oscillator semigroup needs t >= 0")
    gx = prg.gaussian_x(np.tanh(t) / 2.0 * np.eye(n))
    gk = prg.gaussian_fourier(np.sinh(2.0 * t) / 2.0 * np.eye(n))
    steps = [gx, gk, gx]
    out = SplittingProgram(n=n, t=t, steps=steps, target=harmonic_symbol(n),
                           provenance="catalog:harmonic")
    return _finish(out, verify)


# ---------------------------------------------------------------- rotations

def rotation2d(theta: float, margin: float = 1e-3, verify: bool = True) -> SplittingProgram:
    """Three-shear factorization of the planar rotation by ``theta``.

    Coefficients (tan(theta/2), -sin theta, tan(theta/2)); valid for
    |theta| < pi - margin since tan(theta/2) blows up at +-pi.
    """
    if abs(theta) >= math.pi - margin:
        raise SingularParameterError(
            f"near-singular angle {theta:.6f}: tan(theta/2) pole at +-pi; subdivide",
            suggested=math.copysign(math.pi - margin, theta) / 2.0,
        )
    a = math.tan(theta / 2.0)
    b = -math.sin(theta)
    j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    steps = [prg.shear(0, 1, a), prg.shear(1, 0, b), prg.shear(0, 1, a)]
    out = SplittingProgram(n=2, t=theta, steps=steps, target=transport_symbol(j2),
                           provenance="catalog:rotation2d")
    return _finish(out, verify)


# ---------------------------------------------------------------- dilatation

def dilatation_steps(lam: float):
    """The four chirp steps of the 1-D dilatation, execution order."""
    alpha = 0.5 * math.sqrt(abs(1.0 / lam - 1.0) / lam)
    beta = 0.5 * math.sqrt(abs(1.0 - lam))
    eps = 1.0 if lam <= 1.0 else -1.0
    return [
        prg.x_quadratic([[alpha]]),
        prg.fourier_quadratic([[eps * beta]]),
        prg.x_quadratic([[-beta]]),
        prg.fourier_quadratic([[-eps * alpha]]),
    ]


def dilatation(lam: float, verify: bool = True) -> SplittingProgram:
    """Exact pseudo-spectral realization of u -> u(lam * x), lam > 0.

    Four chirp/Fourier-chirp steps plus the scalar lam^{-1/2}; the
    program time is log(lam) and the target symbol is -i x xi + 1/2.
    """
    if lam <= 0:
        raise ValueError("dilatation requires lam > 0")
    t = math.log(lam)
    steps = dilatation_steps(lam) + [prg.scalar(-0.5 * t)]
    target = build_symbol(1, cross=[[-1j]], c=0.5)
    out = SplittingProgram(n=1, t=t, steps=steps, target=target,
                           provenance="catalog:dilatation")
    return _finish(out, verify)


def reflection1d(verify: bool = True) -> SplittingProgram:
    """u -> u(-x) as -i times two quarter-turn chirp triples (experimental).

    A single three-step triple would need tan(pi/2); two quarter turns
    with coefficients tan(pi/4) = 1 avoid the pole.  The -i prefactor
    makes the product equal the grid reflection (global phase checked
    in the tests).
    """
    quarter = [
        prg.fourier_quadratic([[-0.5]]),
        prg.x_quadratic([[0.5]]),
        prg.fourier_quadratic([[-0.5]]),
    ]
    steps = quarter + quarter + [prg.scalar(-1j * math.pi / 2.0)]
    target = build_symbol(1, xx=[[-1j * math.pi / 2.0]], xixi=[[-1j * math.pi / 2.0]],
                          c=1j * math.pi / 2.0)
    out = SplittingProgram(n=1, t=1.0, steps=steps, target=target,
                           provenance="catalog:reflection1d-experimental")
    return _finish(out, verify)


# ---------------------------------------------------------------- SL_n shears

def _transvection(n, row, col, coeff):
    t = np.eye(n)
    t[row, col] = coeff
    return t


def shear_factorize(g, tol: float = 1e-10, verify: bool = True) -> SplittingProgram:
    """Factor G in SL_n(R) into shear steps with u o G as the target.

    Gauss-Jordan elimination with every pivot driven to exactly 1 by an
    auxiliary shear (no row swaps: a swap is not a product of
    transvections, but pivot rescues are).  The emitted composition
    matrices multiply back to G; a generic SL_3 sample costs <= 9
    shears.
    """
    g = np.array(g, dtype=float)
    n = g.shape[0]
    if g.shape != (n, n):
        raise ValueError("G must be square")
    det = np.linalg.det(g)
    if abs(det - 1.0) > 1e-10 * max(1.0, abs(det)):
        raise ValueError(f"G must have determinant 1 (got {det:.12e})")
    scale = max(1.0, np.abs(g).max())
    small = 1e-12 * scale

    a = g.copy()
    left = []    # (row, col, coeff): row_row += coeff * row_col, applied in order
    right = []   # (row, col, coeff) of the right factor I + coeff e_row (x) e_col

    def row_add(i, k, c):
        a[i, :] += c * a[k, :]
        left.append((i, k, c))

    def col_add(jc, kc, c):
        # a <- a @ (I + c e_kc (x) e_jc)
        a[:, jc] += c * a[:, kc]
        right.append((kc, jc, c))

    for k in range(n - 1):
        if abs(a[k, k] - 1.0) > small:
            below = np.abs(a[k + 1:, k])
            if below.size and below.max() <= small:
                if abs(a[k, k]) <= small:
                    raise ValueError("matrix is numerically singular")
                row_add(k + 1, k, 1.0)  # make a pivot donor below
                below = np.abs(a[k + 1:, k])
            j = k + 1 + int(np.argmax(below))
            row_add(k, j, (1.0 - a[k, k]) / a[j, k])
        a[k, k] = 1.0
        for j in range(n):
            if j != k and abs(a[j, k]) > small:
                row_add(j, k, -a[j, k])
            if j != k:
                a[j, k] = 0.0
        for j in range(k + 1, n):
            if abs(a[k, j]) > small:
                col_add(j, k, -a[k, j])
            a[k, j] = 0.0
    # trailing entry is det(G) = 1 up to roundoff

    steps = [prg.shear(i, k, -c) for (i, k, c) in left]
    steps += [prg.shear(i, k, -c) for (i, k, c) in reversed(right)]
    out = SplittingProgram(n=n, t=1.0, steps=steps, target=None, target_map=g,
                           provenance="catalog:shear_factorize")
    return _finish(out, verify)


def rotation_nd(m, t: float, tol: float = 1e-12, max_iter: int = 200,
                verify: bool = True) -> SplittingProgram:
    """Shear-block factorization of e^{t M x . grad} for hollow M.

    Requires zero diagonal and one row i with all off-diagonal entries
    nonzero; the n+1 shear blocks e^{t(y . x) d/dx_k} are solved by the
    generic fixed point on the transposed matrix problem.  Valid for
    |t| below an a-priori-unknown radius; divergence raises with a
    suggested sub-step.
    """
    from .solver import SubspaceDecomposition, generic_fixed_point

    m = np.array(m, dtype=float)
    n = m.shape[0]
    if np.abs(np.diag(m)).max(initial=0.0) > 1e-14 * max(1.0, np.abs(m).max()):
        raise ValueError("rotation_nd requires a zero diagonal")
    full_rows = [i for i in range(n) if all(m[i, j] != 0.0 for j in range(n) if j != i)]
    if not full_rows:
        raise ValueError("rotation_nd requires one row with all off-diagonal entries nonzero")
    i = full_rows[0]

    b = m.T
    order = [i] + [k for k in range(n) if k != i]

    def basis_for(col):
        mats = []
        for row in range(n):
            if row == col:
                continue
            e = np.zeros((n, n))
            e[row, col] = 1.0
            mats.append(e)
        return np.stack(mats)

    comps = []
    for col in order:
        c = np.zeros((n, n))
        c[:, col] = b[:, col]
        comps.append(c)
    dec = SubspaceDecomposition(
        b_spaces=[basis_for(col) for col in order],
        s_space=basis_for(i),
        b_star_components=comps,
    )
    res = generic_fixed_point(dec, t, tol=tol, max_iter=max_iter)

    y_r = res.s[:, i].copy()
    y_i = res.b_components[0][:, i].copy()
    y_l = y_i - y_r
    steps = [prg.shear(i, j, t * y_r[j]) for j in range(n) if j != i]
    for col in reversed(order[1:]):
        k = order.index(col)
        y_k = res.b_components[k][:, col]
        steps += [prg.shear(col, j, t * y_k[j]) for j in range(n) if j != col]
    steps += [prg.shear(i, j, t * y_l[j]) for j in range(n) if j != i]
    out = SplittingProgram(n=n, t=t, steps=steps, target=transport_symbol(m),
                           provenance="catalog:rotation_nd",
                           iteration_log=res.log)
    return _finish(out, verify)


# ---------------------------------------------------------------- Fokker-Planck

def fokker_planck_symbol() -> QuadraticSymbol:
    """Symbol of v d/dx - d/dv(v + d/dv) in coordinates (x, v, xi, eta)."""
    return build_symbol(2, xixi=np.diag([0.0, 1.0]),
                        cross=np.array([[0.0, 1j], [0.0, -1j]]), c=-0.5)


def fokker_planck_matrix(t: float) -> np.ndarray:
    """The PSD Fourier-Gaussian matrix A_t of the Fokker-Planck splitting."""
    return 0.5 * np.array([
        [math.exp(2 * t) + 2 * t + 3 - 4 * math.exp(t), -4 * math.sinh(t / 2) ** 2],
        [-4 * math.sinh(t / 2) ** 2, 1 - math.exp(-2 * t)],
    ])


def fokker_planck_det(t: float) -> float:
    """Closed form of det(A_t) = (t - 2 + 4e^{-t} - (t+2)e^{-2t})/2.

    Checked in the tests against direct 2x2 determinants; O(t^4) at the
    origin and nonnegative for t >= 0.
    """
    return (t - 2.0 + 4.0 * math.exp(-t) - (t + 2.0) * math.exp(-2 * t)) / 2.0


def fokker_planck(t: float, verify: bool = True) -> SplittingProgram:
    """Exact splitting of the kinetic Fokker-Planck semigroup.

    Execution order: the four v-dilatation chirps (lam = e^t), the
    Fourier Gaussian with A_t, the transport shear e^{-(e^t-1) v d/dx},
    and the scalar e^{t/2}.
    """
    if t < 0:
        raise ValueError("Fokker-Planck semigroup needs t >= 0 (A_t loses PSD)")
    alpha = 0.5 * math.sqrt((1.0 - math.exp(-t)) * math.exp(-t))
    beta = 0.5 * math.sqrt(math.exp(t) - 1.0)
    # v-dilatation chirps with lam = e^t >= 1, acting on the v axis
    steps = [
        prg.x_quadratic(np.diag([0.0, alpha])),
        prg.fourier_quadratic(np.diag([0.0, -beta])),
        prg.x_quadratic(np.diag([0.0, -beta])),
        prg.fourier_quadratic(np.diag([0.0, alpha])),
        prg.gaussian_fourier(fokker_planck_matrix(t)),
        prg.shear(0, 1, -(math.exp(t) - 1.0)),
        prg.scalar(t / 2.0),
    ]
    out = SplittingProgram(n=2, t=t, steps=steps, target=fokker_planck_symbol(),
                           provenance="catalog:fokker_planck")
    return _finish(out, verify)


def kfp_symbol() -> QuadraticSymbol:
    """Symbol v^2 + eta^2 + i v xi of the Kramers-Fokker-Planck operator."""
    return build_symbol(2, xx=np.diag([0.0, 1.0]), xixi=np.diag([0.0, 1.0]),
                        cross=np.array([[0.0, 1j], [0.0, 0.0]]))


def kfp_matrix(t: float) -> np.ndarray:
    """The PSD Fourier-Gaussian matrix A_t of the KFP splitting."""
    alpha = 0.5 * (t - math.tanh(t) * (1.0 - math.sinh(t) ** 2))
    return 0.5 * np.array([
        [alpha, math.sinh(t) ** 2],
        [math.sinh(t) ** 2, math.sinh(2 * t)],
    ])


def kfp_det(t: float) -> float:
    """Closed form of det(A_t) = sinh(t) cosh(t) (t - tanh(t)) / 4.

    Equivalently (t sinh(2t)/2 - sinh^2 t)/4; checked against direct
    2x2 determinants in the tests, nonnegative for t >= 0.
    """
    return 0.25 * (t * math.sinh(2 * t) / 2.0 - math.sinh(t) ** 2)


def kramers_fokker_planck(t: float, verify: bool = True) -> SplittingProgram:
    """Four-step exact splitting of the KFP semigroup.

    Execution order: Gaussian e^{-tanh(t)/2 v^2}, transport shear
    e^{-tanh(t) v d/dx}, Fourier Gaussian with A_t, Gaussian in v again.
    """
    if t < 0:
        raise ValueError("KFP semigroup needs t >= 0")
    th = math.tanh(t)
    gx = prg.gaussian_x(np.diag([0.0, th / 2.0]))
    steps = [gx, prg.shear(0, 1, -th), prg.gaussian_fourier(kfp_matrix(t)), gx]
    out = SplittingProgram(n=2, t=t, steps=steps, target=kfp_symbol(),
                           provenance="catalog:kfp")
    return _finish(out, verify)


# ---------------------------------------------------------------- affine pieces

def affine_linear_split(ell: QuadraticSymbol, t: float, verify: bool = True) -> SplittingProgram:
    """Exact splitting of e^{i t ell^w} for a real linear symbol ell.

    Modulations e^{i t L_j x_j}, translations e^{t L_{j+n} d/dx_j} and
    the scalar e^{i t c_t} with c_t = (t/2) sum_j L_j L_{j+n}.
    """
    n = ell.n
    if np.abs(ell.Q).max(initial=0.0) > 1e-14:
        raise ValueError("affine_linear_split needs a symbol with zero quadratic part")
    if not ell.is_real():
        raise ValueError("affine_linear_split needs a real linear symbol")
    ld = ell.Y.real
    c_t = (t / 2.0) * float(ld[:n] @ ld[n:])
    steps = [prg.translate(j, t * ld[n + j]) for j in range(n) if ld[n + j] != 0.0]
    steps += [prg.modulate(j, t * ld[j]) for j in range(n) if ld[j] != 0.0]
    gamma = 1j * (t * c_t + t * ell.c.real)
    if gamma != 0:
        steps.append(prg.scalar(gamma))
    out = SplittingProgram(n=n, t=t, steps=steps, target=ell.scaled(-1j),
                           provenance="catalog:affine_linear")
    return _finish(out, verify)


def translate_conjugate_split(p: QuadraticSymbol, tol: float = 1e-9):
    """Center a real bounded-below symbol: e^{-p^w} = e^{-c} e^{-i l^w} e^{-q^w} e^{i l^w}.

    Returns ``(c, l, q)`` with ``c = p(Y)``, ``l = -(J Y)^T X`` for the
    minimizer shift Y, and ``q`` the quadratic part.  The factorization
    is validated at the affine-flow level by the tests.
    """
    from .symplectic import canonical_j, lower_bound_decompose

    q_sym, y_shift, c = lower_bound_decompose(p, tol=tol)
    l_vec = -(canonical_j(p.n) @ y_shift)
    ell = QuadraticSymbol(p.n, np.zeros((2 * p.n, 2 * p.n)), l_vec, 0.0)
    return c, ell, q_sym


# ---------------------------------------------------------------- dispatcher

def _diagonal_quadratic_steps(t, ax, bx, axis, n):
    """Steps for e^{-t(a x_j^2 + b xi_j^2)^w} on one axis, execution order.

    Both coefficients positive gives the scaled three-step Gaussian
    sandwich with theta = 2t sqrt(ab); a degenerate axis is a single
    Gaussian factor.
    """
    def diag(v):
        m = np.zeros((n, n))
        m[axis, axis] = v
        return m

    if ax < 0 or bx < 0:
        raise NotBoundedBelowError("quadratic part must be PSD")
    if t == 0 or (ax == 0 and bx == 0):
        return []
    if ax > 0 and bx == 0:
        return [prg.gaussian_x(diag(t * ax))]
    if bx > 0 and ax == 0:
        return [prg.gaussian_fourier(diag(t * bx))]
    theta = 2.0 * t * math.sqrt(ax * bx)
    c1 = theta * math.tanh(theta / 2.0) / (4.0 * t * bx)
    c2 = t * bx * math.sinh(theta) / theta
    gx = prg.gaussian_x(diag(c1))
    return [gx, prg.gaussian_fourier(diag(c2)), gx]


def factor_symbol(p: QuadraticSymbol, t: float, tol: float = 1e-9,
                  verify: bool = True) -> SplittingProgram:
    """Exact splitting of e^{-t p^w} for the directly factorizable symbols.

    Two families are handled without any normal-form machinery:

    * ``p = -i ell`` with ``ell`` real and degree <= 1: modulation and
      translation phases (the transport case);
    * ``p`` real, bounded below, with a *diagonal* quadratic part: the
      minimizer shift is moved into conjugating linear phases
      e^{+-i l^w} and each axis contributes a (scaled) Gaussian
      sandwich.

    Anything else needs a symplectic normal form and is rejected.
    """
    n = p.n
    imag_lin = p.scaled(1j)
    if np.abs(p.Q).max(initial=0.0) <= 1e-14 and imag_lin.is_real():
        return affine_linear_split(imag_lin, t, verify=verify)
    if not p.is_real():
        raise ValueError(
            "factor_symbol handles real bounded-below symbols and imaginary "
            "linear symbols only")
    offdiag = p.Q.real - np.diag(np.diag(p.Q.real))
    if np.abs(offdiag).max(initial=0.0) > 1e-12 * max(1.0, np.abs(p.Q).max()):
        raise ValueError(
            "factor_symbol requires a diagonal quadratic part (general "
            "symplectic normal forms are out of scope)")
    if t < 0:
        raise ValueError("dissipative semigroup needs t >= 0")
    c, ell, q_sym = translate_conjugate_split(p, tol=tol)

    steps = []
    if np.abs(ell.Y).max(initial=0.0) > 0.0:
        steps += affine_linear_split(ell, 1.0, verify=False).steps
    mid = []
    for axis in range(n):
        mid += _diagonal_quadratic_steps(t, p.Q.real[axis, axis],
                                         p.Q.real[n + axis, n + axis], axis, n)
    steps += mid
    if np.abs(ell.Y).max(initial=0.0) > 0.0:
        steps += affine_linear_split(ell, -1.0, verify=False).steps
    if t * c != 0.0:
        steps.append(prg.scalar(-t * c))
    out = SplittingProgram(n=n, t=t, steps=steps, target=p,
                           provenance="catalog:factor_symbol")
    return _finish(out, verify)
