"""Iterative construction of splitting coefficients, plus program verification.

Two solvers live here: a generic fixed point over user-supplied
subspace decompositions of a matrix Lie algebra, and the specialized
nilpotent-factor iteration for magnetic Schrodinger operators.  Both
monitor a residual in the Frobenius norm and raise
:class:`DivergenceError` with a suggested smaller step when the
requested time lies outside the (a priori unknown) convergence radius.
"""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .matfuncs import BranchCutError, expm, logm_principal
from .program import SplittingProgram, step_symbol
from .symplectic import (
    AffineFlow,
    QuadraticSymbol,
    affine_flow,
    build_symbol,
    canonical_j,
    compose_affine,
    homogenize,
    is_nonneg_symplectic,
)

__all__ = [
    "DivergenceError",
    "SubspaceDecomposition",
    "GenericSplitResult",
    "generic_fixed_point",
    "SchrodingerCoefficients",
    "schrodinger_coefficients",
    "schrodinger_symbol",
    "schrodinger_program",
    "SplitReport",
    "verify_program",
]


class DivergenceError(RuntimeError):
    """Iteration did not converge at the requested time step.

    ``suggested_t`` is the largest time found to converge by bisection
    (None when even tiny steps fail, which indicates a structural
    problem rather than a step-size one).
    """

    def __init__(self, message, suggested_t=None):
        super().__init__(message)
        self.suggested_t = suggested_t


def _digest(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


# ================================================================= generic

@dataclass
class SubspaceDecomposition:
    """Bases for b_1..b_m, s and the target components b_*j.

    ``b_spaces``: list of (k_j, d, d) arrays of basis matrices;
    ``s_space``: (k_s, d, d); ``b_star_components``: list of (d, d)
    matrices, one per b-space, each required to lie in its space.

    The complement r of b inside span(b) + [b_*, s] is taken orthogonal
    under the Frobenius inner product, so the projections are plain
    orthogonal projections and Psi^{-1} is a minimum-norm solve (which
    fixes the subspace s' as the orthogonal complement of ker Psi).
    """

    b_spaces: list
    s_space: np.ndarray
    b_star_components: list

    def __post_init__(self):
        self.b_spaces = [np.asarray(sp, dtype=float) for sp in self.b_spaces]
        self.b_star_components = [np.asarray(c, dtype=float) for c in self.b_star_components]
        if len(self.b_star_components) != len(self.b_spaces):
            raise ValueError("one target component per b-space required")
        self.d = self.b_spaces[0].shape[-1]
        self.m = len(self.b_spaces)
        self.s_space = np.asarray(self.s_space, dtype=float).reshape(-1, self.d, self.d)
        self._b_cols = np.concatenate(
            [sp.reshape(sp.shape[0], -1).T for sp in self.b_spaces], axis=1)
        self._b_sizes = [sp.shape[0] for sp in self.b_spaces]
        nb = self._b_cols.shape[1]
        if np.linalg.matrix_rank(self._b_cols, tol=1e-10) != nb:
            raise ValueError("b-space basis matrices are not linearly independent")
        # components must lie in their spaces
        for sp, comp in zip(self.b_spaces, self.b_star_components):
            cols = sp.reshape(sp.shape[0], -1).T
            coef, res, *_ = np.linalg.lstsq(cols, comp.reshape(-1), rcond=None)
            rec = cols @ coef
            if np.linalg.norm(rec - comp.reshape(-1)) > 1e-12 * max(1.0, np.linalg.norm(comp)):
                raise ValueError("a target component does not lie in its b-space")
        self.b_star = sum(self.b_star_components)
        # r = orthogonal complement of col(b) inside col(b) + ad_{b*}(s)
        if self.s_space.shape[0]:
            ad_cols = np.stack(
                [(self.b_star @ s - s @ self.b_star).reshape(-1) for s in self.s_space], axis=1)
        else:
            ad_cols = np.zeros((self.d * self.d, 0))
        qb, _ = np.linalg.qr(self._b_cols)
        self._qb = qb
        resid = ad_cols - qb @ (qb.T @ ad_cols)
        if resid.shape[1]:
            u, sv, _ = np.linalg.svd(resid, full_matrices=False)
            rank = int((sv > 1e-10 * max(1.0, sv.max(initial=0.0))).sum())
            self._r_cols = u[:, :rank]
        else:
            self._r_cols = np.zeros((self.d * self.d, 0))
        # Psi = Pi_r o ad_{b*} in (r-basis x s-basis) coordinates
        self._psi = self._r_cols.T @ ad_cols
        self._psi_pinv = np.linalg.pinv(self._psi, rcond=1e-12) if self._psi.size else self._psi.T
        self.r_dim = self._r_cols.shape[1]

    # -- projections ---------------------------------------------------
    def split_g(self, g):
        """Least-squares split of g into b-components and r-coordinates."""
        cols = np.concatenate([self._b_cols, self._r_cols], axis=1)
        coef, *_ = np.linalg.lstsq(cols, g.reshape(-1), rcond=None)
        nb = self._b_cols.shape[1]
        beta, rho = coef[:nb], coef[nb:]
        comps = []
        i0 = 0
        for sp, k in zip(self.b_spaces, self._b_sizes):
            comps.append(np.tensordot(beta[i0:i0 + k], sp, axes=1))
            i0 += k
        leftover = np.linalg.norm(cols @ coef - g.reshape(-1))
        return comps, rho, leftover

    def s_from_r(self, rho):
        """Psi^{-1} applied to an element of r given in r-coordinates."""
        if self.s_space.shape[0] == 0:
            return np.zeros((self.d, self.d))
        return np.tensordot(self._psi_pinv @ rho, self.s_space, axes=1)

    def s_star(self):
        comm = np.zeros((self.d, self.d))
        comps = self.b_star_components
        for i in range(self.m):
            for j in range(i + 1, self.m):
                comm += comps[i] @ comps[j] - comps[j] @ comps[i]
        rho = self._r_cols.T @ comm.reshape(-1)
        return -0.5 * self.s_from_r(rho)


@dataclass
class GenericSplitResult:
    b_components: list
    s: np.ndarray
    residuals: list
    iterations: int
    converged: bool
    log: list = field(default_factory=list)


def _generic_attempt(dec, t, tol, max_iter):
    b = [c.copy() for c in dec.b_star_components]
    s = dec.s_star()
    residuals, log = [], []
    best = np.inf
    for k in range(max_iter):
        m = expm(-t * s)
        for bj in b:
            m = m @ expm(t * bj)
        m = m @ expm(t * s)
        g = logm_principal(m) / t
        g = np.real(g)
        res = float(np.linalg.norm(g - dec.b_star))
        residuals.append(res)
        log.append({"k": k, "residual": res, "digest": _digest(b + [s])})
        if not np.isfinite(res) or res > 1e3 * max(best, tol):
            return None, residuals, log
        best = min(best, res)
        if res <= tol:
            return GenericSplitResult(b, s, residuals, k, True, log), residuals, log
        comps, rho, leftover = dec.split_g(g)
        b = [bj + bs - cj for bj, bs, cj in zip(b, dec.b_star_components, comps)]
        s = s - (1.0 / t) * dec.s_from_r(rho)
    return None, residuals, log


def generic_fixed_point(dec: SubspaceDecomposition, t: float, tol: float = 1e-12,
                        max_iter: int = 100) -> GenericSplitResult:
    """Solve e^{t b_*} = e^{-t s}e^{t b_1}...e^{t b_m}e^{t s} iteratively.

    Starts from (b_*, s_*) and repeats
    ``b <- b + b_* - Pi_b g`` and ``s <- s - t^{-1} Psi^{-1} Pi_r g``
    with ``g = t^{-1} log(product)`` until ``||g - b_*|| <= tol``.

    At t = 0 the closed-form limit (b_*, s_*) is returned directly.
    On divergence, smaller times are bisected to report the largest
    convergent step in :class:`DivergenceError`.
    """
    if t == 0.0:
        return GenericSplitResult([c.copy() for c in dec.b_star_components],
                                  dec.s_star(), [], 0, True)
    try:
        result, residuals, log = _generic_attempt(dec, t, tol, max_iter)
    except BranchCutError as err:
        result, residuals, log = None, [], [{"k": 0, "error": str(err)}]
    if result is not None:
        return result
    # bisect downward for a usable step suggestion
    suggested = None
    probe = t / 2.0
    for _ in range(12):
        try:
            got, *_ = _generic_attempt(dec, probe, tol, max_iter)
        except BranchCutError:
            got = None
        if got is not None:
            suggested = probe
            break
        probe /= 2.0
    raise DivergenceError(
        f"generic fixed point did not converge at t={t} "
        f"(last residual {residuals[-1] if residuals else float('nan'):.3e})",
        suggested_t=suggested,
    )


# ============================================================== Schrodinger

@dataclass
class SchrodingerCoefficients:
    """Converged factors of the magnetic Schrodinger exact splitting.

    ``V_ell`` is diagonal, ``U`` strictly upper, ``L`` strictly lower,
    ``A`` and ``V_r`` symmetric; structural zero patterns hold exactly
    at every iterate because the updates act on structured extractions,
    never on post-hoc projections.
    """

    n: int
    t: float
    V_ell: np.ndarray
    U: np.ndarray
    A: np.ndarray
    L: np.ndarray
    V_r: np.ndarray
    V_m: np.ndarray
    iterations: int
    residual: float
    residual_history: list
    flow_residual: float
    log: list = field(default_factory=list)


def schrodinger_symbol(v, b) -> QuadraticSymbol:
    """Symbol i(|xi|^2/2 + v(x) + B x . xi) whose semigroup is the
    magnetic Schrodinger propagator e^{it(Lap/2 - v) - t Bx.grad}."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    return build_symbol(n, xx=1j * v, xixi=0.5j * np.eye(n), cross=1j * np.asarray(b, float))


def _schro_flow_factors(n, t, a, l, u, v_m):
    """The 2n x 2n product of elementary symplectic factors P_{t}."""
    eye = np.eye(n)
    p = np.eye(2 * n)
    for j in range(n - 1):
        row = np.zeros((n, n))
        row[j, :] = u[j, :]
        blk = np.zeros((2 * n, 2 * n))
        blk[:n, :n] = eye + t * row
        blk[n:, n:] = eye - t * row.T
        p = p @ blk
    mid = np.eye(2 * n)
    mid[:n, n:] = 2.0 * t * a
    p = p @ mid
    for j in range(1, n):
        row = np.zeros((n, n))
        row[j, :] = l[j, :]
        blk = np.zeros((2 * n, 2 * n))
        blk[:n, :n] = eye + t * row
        blk[n:, n:] = eye - t * row.T
        p = p @ blk
    last = np.eye(2 * n)
    last[n:, :n] = -2.0 * t * v_m
    return p @ last


def _schro_attempt(v, b, t, tol, max_iter):
    n = v.shape[0]
    jn = canonical_j(n)
    l0 = np.tril(b, -1)
    u0 = np.triu(b, 1)
    a = np.eye(n) / 2.0
    l = l0.copy()
    u = u0.copy()
    v_m = v.copy()
    d = np.zeros((n, n))
    history, log = [], []
    best = np.inf
    for k in range(max_iter):
        p = _schro_flow_factors(n, t, a, l, u, v_m)
        lam = -(1.0 / t) * (jn @ np.real(logm_principal(p)))
        v_tilde = (lam[:n, :n] + lam[:n, :n].T) / 4.0
        a_tilde = (lam[n:, n:] + lam[n:, n:].T) / 4.0
        m_tilde = lam[n:, :n]
        d = np.diag(np.diag(m_tilde)) / t
        l_tilde = np.tril(m_tilde, -1)
        u_tilde = np.triu(m_tilde, 1)
        corr = (t / 2.0) * (d @ b - b @ d) + (t * t / 2.0) * (d @ d)
        res = float(
            np.linalg.norm(a_tilde - np.eye(n) / 2.0)
            + np.linalg.norm(l_tilde - l0)
            + np.linalg.norm(u_tilde - u0)
            + np.linalg.norm(v_tilde - v - corr)
        )
        history.append(res)
        log.append({"k": k, "residual": res, "digest": _digest([a, l, u, v_m])})
        if not np.isfinite(res) or res > 1e3 * max(best, tol):
            return None, history, log
        best = min(best, res)
        if res <= tol:
            return (a, l, u, v_m, d, k, res), history, log
        a = a + np.eye(n) / 2.0 - a_tilde
        l = l + l0 - l_tilde
        u = u + u0 - u_tilde
        v_m = v_m + v - v_tilde + corr
    return None, history, log


def schrodinger_coefficients(v, b, t: float, tol: float = 1e-12,
                             max_iter: int = 200) -> SchrodingerCoefficients:
    """Coefficients of the 2n-FFT exact splitting for the magnetic
    Schrodinger semigroup with quadratic potential v and rotation B.

    ``v`` is the symmetric matrix of the potential quadratic form, ``b``
    a real skew-symmetric matrix.  The iteration assembles the product
    of shear/chirp factor flows, extracts the effective quadratic form
    from -t^{-1} J log(P), and corrects the x-quadratic block by
    (t/2)[D,B] + (t^2/2)D^2; it stops when the stacked Frobenius
    residual falls below ``tol``.
    """
    v = np.asarray(v, dtype=float)
    b = np.asarray(b, dtype=float)
    n = v.shape[0]
    if np.linalg.norm(b + b.T) > 1e-12 * max(1.0, np.linalg.norm(b)):
        raise ValueError("B must be skew-symmetric")
    v = (v + v.T) / 2.0
    if t == 0.0:
        return SchrodingerCoefficients(
            n=n, t=0.0, V_ell=np.zeros((n, n)), U=np.triu(b, 1), A=np.eye(n) / 2.0,
            L=np.tril(b, -1), V_r=v.copy(), V_m=v.copy(), iterations=0, residual=0.0,
            residual_history=[], flow_residual=0.0)
    try:
        got, history, log = _schro_attempt(v, b, t, tol, max_iter)
    except BranchCutError as err:
        got, history, log = None, [], [{"k": 0, "error": str(err)}]
    if got is None:
        suggested = None
        probe = t / 2.0
        for _ in range(12):
            try:
                ok, *_ = _schro_attempt(v, b, probe, tol, max_iter)
            except BranchCutError:
                ok = None
            if ok is not None:
                suggested = probe
                break
            probe /= 2.0
        raise DivergenceError(
            f"Schrodinger coefficient iteration did not converge at t={t}",
            suggested_t=suggested,
        )
    a, l, u, v_m, d, k, res = got
    v_ell = -d / 2.0
    v_r = v_m + d / 2.0
    # flow check: conjugating the factor product by the v_ell chirp flow
    # must reproduce the target flow exactly
    p = _schro_flow_factors(n, t, a, l, u, v_m)
    s_ell = np.eye(2 * n)
    s_ell[n:, :n] = -2.0 * t * v_ell
    s_ell_inv = np.eye(2 * n)
    s_ell_inv[n:, :n] = 2.0 * t * v_ell
    q_target = np.zeros((2 * n, 2 * n))
    q_target[:n, :n] = v
    q_target[n:, n:] = np.eye(n) / 2.0
    q_target[:n, n:] = b.T / 2.0
    q_target[n:, :n] = b / 2.0
    target = expm(2.0 * t * (canonical_j(n) @ q_target))
    flow_res = float(np.abs(s_ell @ p @ s_ell_inv - target).max())
    return SchrodingerCoefficients(
        n=n, t=t, V_ell=v_ell, U=u, A=a, L=l, V_r=v_r, V_m=v_m,
        iterations=k, residual=res, residual_history=history,
        flow_residual=flow_res, log=log)


def schrodinger_program(coeffs: SchrodingerCoefficients, v=None, b=None) -> SplittingProgram:
    """Assemble the splitting program from converged coefficients.

    Execution order: chirp e^{-it v_r(x)}, lower-row shears, Fourier
    chirp e^{it a(grad)}, upper-row shears, chirp e^{-it v_ell(x)}.
    With fused transforms this executes in exactly 2n 1-D FFT passes.
    """
    from . import program as prg

    n, t = coeffs.n, coeffs.t
    if v is None:
        v = coeffs.V_r + coeffs.V_ell  # V_m + D/2 - D/2
    if b is None:
        b = coeffs.L + coeffs.U
    steps = [prg.x_quadratic(-t * coeffs.V_r)]
    for j in range(n - 1, 0, -1):  # lower rows j = n..2 in operator order
        steps += [prg.shear(j, k, -t * coeffs.L[j, k])
                  for k in range(j) if coeffs.L[j, k] != 0.0]
    steps.append(prg.fourier_quadratic(t * coeffs.A))
    for j in range(n - 2, -1, -1):  # upper rows j = n-1..1 in operator order
        steps += [prg.shear(j, k, -t * coeffs.U[j, k])
                  for k in range(j + 1, n) if coeffs.U[j, k] != 0.0]
    steps.append(prg.x_quadratic(-t * coeffs.V_ell))
    return SplittingProgram(n=n, t=t, steps=steps, target=schrodinger_symbol(v, b),
                            provenance="solver:schrodinger", iteration_log=coeffs.log)


# ============================================================ verification

@dataclass
class SplitReport:
    """Phase-space verification record for a splitting program."""

    ok: bool
    tol: float
    residual: float
    residual_linear: float
    residual_shift: float
    residual_phase: float
    factor_margins: list
    gaussian_margins: list
    step_count: int
    fft_passes_fused: int
    provenance: str
    iterations: int = 0
    notes: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "ok": self.ok,
            "tol": self.tol,
            "residual": self.residual,
            "residual_linear": self.residual_linear,
            "residual_shift": self.residual_shift,
            "residual_phase": self.residual_phase,
            "factor_margins": self.factor_margins,
            "gaussian_margins": self.gaussian_margins,
            "step_count": self.step_count,
            "fft_passes_fused": self.fft_passes_fused,
            "provenance": self.provenance,
            "iterations": self.iterations,
            "notes": self.notes,
        }


def _target_affine(prog: SplittingProgram) -> AffineFlow:
    if prog.target is not None:
        return affine_flow(prog.absorbed_target(), 1.0)
    g = prog.target_map
    n = prog.n
    lin = np.zeros((2 * n, 2 * n), dtype=complex)
    lin[:n, :n] = np.linalg.inv(g)
    lin[n:, n:] = g.T
    return AffineFlow(n, lin, np.zeros(2 * n), 0.0)


def verify_program(prog: SplittingProgram, tol: float = 1e-10,
                   check_factors: bool = True) -> SplitReport:
    """Phase-space check that the factor flows compose to the target flow.

    Every step is mapped to its time-1 symbol, homogenized, and composed
    as affine flows in operator order (reverse of execution order); the
    result is compared block-by-block against the target's affine flow.
    The report also carries the Sp+ margin of each factor's homogenized
    flow (checked whenever the factor symbol has PSD real part) and the
    PSD margins of Gaussian steps.
    """
    from .engine import plan_fft_passes

    n = prog.n
    symbols = [step_symbol(s, n) for s in prog.steps]
    flows = [affine_flow(s, 1.0) for s in symbols]
    composed = compose_affine(list(reversed(flows))) if flows else AffineFlow.identity(n)
    expected = _target_affine(prog)

    res_lin = float(np.linalg.norm(composed.linear - expected.linear))
    res_shift = float(np.linalg.norm(composed.shift - expected.shift))
    res_phase = float(abs(composed.phase - expected.phase))
    residual = float(np.linalg.norm(composed.full_matrix() - expected.full_matrix()))

    factor_margins = []
    notes = []
    if check_factors:
        from .symplectic import appendix_permutation

        perm = appendix_permutation(n)
        inv_perm = np.argsort(perm)
        for step, sym, fl in zip(prog.steps, symbols, flows):
            qh = homogenize(sym)
            re_psd = float(np.linalg.eigvalsh(qh.Q.real).min())
            full = fl.full_matrix()[np.ix_(inv_perm, inv_perm)]
            in_sp_plus, margin = is_nonneg_symplectic(full, tol=max(tol, 1e-10))
            factor_margins.append({
                "kind": step.kind,
                "sp_plus_margin": margin,
                "hypothesis_psd": re_psd >= -1e-10,
                "in_sp_plus": in_sp_plus,
            })
            if re_psd >= -1e-10 and not in_sp_plus:
                notes.append(f"factor {step.kind}: PSD real part but Sp+ margin {margin:.2e}")

    gaussian_margins = [
        float(np.linalg.eigvalsh(s.matrix).min())
        for s in prog.steps if s.kind in ("gaussian_x", "gaussian_fourier")
    ]

    return SplitReport(
        ok=residual <= tol,
        tol=tol,
        residual=residual,
        residual_linear=res_lin,
        residual_shift=res_shift,
        residual_phase=res_phase,
        factor_margins=factor_margins,
        gaussian_margins=gaussian_margins,
        step_count=len(prog.steps),
        fft_passes_fused=plan_fft_passes(prog),
        provenance=prog.provenance,
        iterations=len(prog.iteration_log),
        notes=notes,
    )
