"""Acceptance suite: one test per criterion, each printing a PASS line
with the measured figure (run with ``pytest -v -s`` to see the lines).

Two determinant identities are asserted against closed forms that were
re-derived and cross-validated here, because the originally published
expressions are inconsistent with the (flow-verified) matrix entries
they describe; the corresponding tests also assert that discrepancy so
it stays visible.  See the catalog docstrings for the corrected forms.
"""

import math

import numpy as np
import pytest

from conftest import commutator_residual, localized_test_vectors, random_symbol
from exactsplit import catalog
from exactsplit.catalog import (
    affine_linear_split,
    dilatation,
    fokker_planck,
    fokker_planck_det,
    fokker_planck_matrix,
    harmonic_oscillator,
    kfp_det,
    kfp_matrix,
    kramers_fokker_planck,
    reflection1d,
    rotation2d,
    rotation_nd,
    shear_factorize,
)
from exactsplit.engine import Grid, StateField, execute, gaussian, l2_error, l2_norm
from exactsplit.oracles import (
    dense_semigroup,
    discretize_weyl,
    harmonic_ground_state,
    maxwellian,
    strang_harmonic,
)
from exactsplit.program import SplittingProgram
from exactsplit.solver import (
    SubspaceDecomposition,
    generic_fixed_point,
    schrodinger_coefficients,
    schrodinger_program,
    schrodinger_symbol,
    verify_program,
)
from exactsplit.symplectic import QuadraticSymbol

ROT2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def report(number, name, detail):
    print(f"[PASS] criterion {number} ({name}): {detail}")


# ---------------------------------------------------------------------------
def test_criterion_01_flow_level_exactness():
    """Every catalog splitting: 50 random admissible draws, composed
    factor flows match the target affine flow to 1e-10 (Frobenius)."""
    rng = np.random.default_rng(101)
    worst = 0.0
    draws = 50

    def check(prog):
        nonlocal worst
        rep = verify_program(prog, tol=1e-10)
        worst = max(worst, rep.residual)
        assert rep.ok, f"{prog.provenance}: {rep.residual:.3e}"

    for _ in range(draws):
        check(harmonic_oscillator(float(rng.uniform(0, 2)), int(rng.integers(1, 4)),
                                  verify=False))
        check(rotation2d(float(rng.uniform(-math.pi + 0.02, math.pi - 0.02)),
                         verify=False))
        check(dilatation(float(np.exp(rng.uniform(-2, 2))), verify=False))
        check(fokker_planck(float(rng.uniform(0, 2.5)), verify=False))
        check(kramers_fokker_planck(float(rng.uniform(0, 2.5)), verify=False))
        n = int(rng.integers(1, 4))
        ell = QuadraticSymbol(n, np.zeros((2 * n, 2 * n)), rng.normal(size=2 * n), 0.0)
        check(affine_linear_split(ell, float(rng.uniform(-1.5, 1.5)), verify=False))
    for _ in range(draws):
        a = rng.normal(size=(3, 3))
        a -= np.trace(a) / 3 * np.eye(3)
        import scipy.linalg

        check(shear_factorize(scipy.linalg.expm(0.6 * a), verify=False))
    from exactsplit.solver import DivergenceError

    for _ in range(10):
        m = rng.normal(size=(3, 3))
        np.fill_diagonal(m, 0.0)
        m[0, 1] = 1.0 + abs(m[0, 1])
        m[0, 2] = 1.0 + abs(m[0, 2])
        m /= np.abs(m).max()
        t = float(rng.uniform(-0.15, 0.15))
        # admissibility of t is discovered at runtime: subdivide on demand
        for _ in range(6):
            try:
                check(rotation_nd(m, t, verify=False))
                break
            except DivergenceError as err:
                t = err.suggested_t if err.suggested_t else t / 2.0
        else:
            raise AssertionError("no admissible step found for a rotation_nd draw")
    check(reflection1d(verify=False))
    report(1, "flow-level exactness", f"worst residual {worst:.3e} <= 1e-10")


# ---------------------------------------------------------------------------
def test_criterion_02_harmonic_closed_form_grid():
    """One step of t=0.5 equals 100 steps of t=0.005 equals e^-0.5 u0."""
    g = Grid((128,), ((-10.0, 10.0),))
    u0 = harmonic_ground_state(g)
    expected = StateField(g, u0.values * math.exp(-0.5))

    one, _ = execute(u0, harmonic_oscillator(0.5, 1))
    err_one = l2_error(one, expected)
    assert err_one <= 1e-8

    many = u0
    prog = harmonic_oscillator(0.005, 1)
    for _ in range(100):
        many, _ = execute(many, prog)
    err_many = l2_error(many, expected)
    assert err_many <= 1e-8
    report(2, "harmonic closed form", f"1-step err {err_one:.2e}, "
           f"100-step err {err_many:.2e} <= 1e-8 (tau-independent)")


# ---------------------------------------------------------------------------
def test_criterion_03_strang_contrast():
    """Strang error slope 2.0 +- 0.1 vs exact slope magnitude <= 0.1."""
    g = Grid((48,), ((-7.0, 7.0),))
    u0 = harmonic_ground_state(g)
    t_final = 0.5
    taus = [0.1, 0.05, 0.025]
    errs = {"exact": [], "strang": []}
    for tau in taus:
        steps = round(t_final / tau)
        for name, builder in (("exact", harmonic_oscillator),
                              ("strang", strang_harmonic)):
            field = u0
            prog = builder(tau, 1)
            for _ in range(steps):
                field, _ = execute(field, prog)
            expected = StateField(g, u0.values * math.exp(-t_final))
            errs[name].append(l2_error(field, expected))
    log_tau = np.log(taus)
    strang_slope = np.polyfit(log_tau, np.log(errs["strang"]), 1)[0]
    exact_slope = np.polyfit(log_tau, np.log(errs["exact"]), 1)[0]
    assert abs(strang_slope - 2.0) <= 0.1
    assert abs(exact_slope) <= 0.1
    report(3, "Strang contrast",
           f"strang slope {strang_slope:.3f} in 2.0+-0.1; "
           f"exact slope {exact_slope:.4f} (grid floor {errs['exact'][0]:.1e})")


# ---------------------------------------------------------------------------
def test_criterion_04_rotation_factorization():
    """2x2 shear product equals the rotation for 100 angles, 1e-13."""
    worst = 0.0
    for theta in np.linspace(-math.pi + 0.01, math.pi - 0.01, 100):
        prog = rotation2d(theta, verify=False)
        g = np.eye(2)
        for s in prog.steps:
            t = np.eye(2)
            t[s.axis, s.source] = s.alpha
            g = g @ t
        rot = np.array([[math.cos(theta), math.sin(theta)],
                        [-math.sin(theta), math.cos(theta)]])
        worst = max(worst, np.abs(g - rot).max())
    assert worst <= 1e-13
    report(4, "rotation factorization", f"worst matrix residual {worst:.2e} <= 1e-13")


# ---------------------------------------------------------------------------
def test_criterion_05_fokker_planck():
    """det A_t identity (corrected closed form), PSD margin, and
    end-to-end Maxwellian invariance on a 128x128 grid."""
    worst_det = 0.0
    min_eig = np.inf
    published = lambda t: (3 * np.exp(4 * t) - 12 * np.exp(3 * t)
                           + (8 * t + 2) * np.exp(2 * t) + 20 * np.exp(t)
                           - 8 * t - 13) * np.exp(-2 * t) / 16
    for t in np.linspace(0.0, 5.0, 20):
        a = fokker_planck_matrix(t)
        direct = float(np.linalg.det(a))
        worst_det = max(worst_det, abs(direct - fokker_planck_det(t)))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(a).min()))
    assert worst_det <= 1e-11
    assert min_eig >= -1e-12
    # the expression printed in the source proof disagrees with its own
    # A_t entries; keep that discrepancy visible
    assert abs(published(1.0) - float(np.linalg.det(fokker_planck_matrix(1.0)))) > 1e-3

    g = Grid((128, 128), ((-9.0, 9.0), (-10.0, 10.0)))
    u0 = maxwellian(g)
    field = u0
    prog = fokker_planck(0.5)
    for _ in range(2):
        field, _ = execute(field, prog)
    inv_err = l2_error(field, u0)
    assert inv_err <= 1e-7
    report(5, "Fokker-Planck", f"det residual {worst_det:.2e} <= 1e-11 "
           f"(corrected closed form; published display off by O(1)), "
           f"min eig {min_eig:.2e}, Maxwellian drift {inv_err:.2e} <= 1e-7")


# ---------------------------------------------------------------------------
def test_criterion_06_kfp():
    """KFP det A_t identity (corrected closed form) and e^-t decay."""
    worst = 0.0
    for t in np.linspace(0.0, 5.0, 26):
        direct = float(np.linalg.det(kfp_matrix(t)))
        closed = kfp_det(t)
        worst = max(worst, abs(direct - closed) / max(1.0, abs(closed)))
    assert worst <= 1e-12
    # published display: tanh(t)(t - tanh t)/4; the true determinant is
    # sinh(t)cosh(t)(t - tanh t)/4
    published = 0.25 * math.tanh(1.0) * (1.0 - math.tanh(1.0))
    assert abs(published - float(np.linalg.det(kfp_matrix(1.0)))) > 1e-3

    g = Grid((64, 96), ((-6.0, 6.0), (-10.0, 10.0)))
    u0 = maxwellian(g)
    t = 0.5
    field, _ = execute(u0, kramers_fokker_planck(t))
    decay_err = l2_error(field, StateField(g, u0.values * math.exp(-t)))
    assert decay_err <= 1e-7
    report(6, "Kramers-Fokker-Planck", f"det residual {worst:.2e} <= 1e-12 "
           f"(corrected closed form), e^-t decay err {decay_err:.2e} <= 1e-7")


# ---------------------------------------------------------------------------
def test_criterion_07_schrodinger_iteration():
    """Geometric residual decay, flow residual <= 1e-12, unitary
    execution, and dense-oracle agreement on a 48x48 grid."""
    v = np.eye(2)
    t = 0.1
    co = schrodinger_coefficients(v, ROT2, t, tol=1e-13)
    rs = [r for r in co.residual_history if r > 1e-12]
    k = np.arange(len(rs))
    logs = np.log(rs)
    slope, intercept = np.polyfit(k, logs, 1)
    pred = slope * k + intercept
    r2 = 1 - np.sum((logs - pred) ** 2) / np.sum((logs - logs.mean()) ** 2)
    assert slope < 0 and r2 >= 0.99
    assert co.flow_residual <= 1e-12

    prog = schrodinger_program(co, v, ROT2)
    g = Grid((48, 48), ((-8.0, 8.0), (-8.0, 8.0)))
    u0 = gaussian(g, [0.6, 0.0], [1.0, 1.1])
    norms = []
    out, _ = execute(u0, prog, collect=lambda i, s, f, st: norms.append(l2_norm(f)))
    n0 = l2_norm(u0)
    drift = max(abs(n / n0 - 1.0) for n in norms)
    assert drift <= 1e-12

    op = discretize_weyl(schrodinger_symbol(v, ROT2), g)
    ref_mat = dense_semigroup(op, t)
    ref = StateField(g, (ref_mat @ u0.values.reshape(-1)).reshape(g.sizes))
    dense_err = l2_error(out, ref)
    assert dense_err <= 1e-6
    report(7, "Schrodinger iteration",
           f"R^2 {r2:.4f} >= 0.99, flow residual {co.flow_residual:.2e} <= 1e-12, "
           f"norm drift {drift:.2e} <= 1e-12, dense err {dense_err:.2e} <= 1e-6")


# ---------------------------------------------------------------------------
def test_criterion_08_generic_fixed_point_rate():
    """sl2 test decomposition: residual ratios <= 0.55 after k=3."""
    e = np.array([[0.0, 1.0], [0.0, 0.0]])
    f = np.array([[0.0, 0.0], [1.0, 0.0]])
    dec = SubspaceDecomposition(b_spaces=[e[None], f[None]], s_space=e[None],
                                b_star_components=[e, -f])
    res = generic_fixed_point(dec, 0.1, tol=1e-13)
    assert res.converged
    rs = res.residuals
    ratios = [rs[i + 1] / rs[i] for i in range(len(rs) - 1) if rs[i] > 1e-12]
    checked = ratios[3:] if len(ratios) > 3 else ratios
    assert checked and all(r <= 0.55 for r in checked)
    report(8, "generic fixed point", f"max ratio {max(checked):.3f} <= 0.55 "
           f"({len(rs)} residuals, final {rs[-1]:.2e})")


# ---------------------------------------------------------------------------
def test_criterion_09_fft_counts():
    """Documented FFT pass counts, fusion on: harmonic n=1 takes 2,
    the Schrodinger program takes 2n."""
    g1 = Grid((128,), ((-10.0, 10.0),))
    _, stats1 = execute(harmonic_ground_state(g1), harmonic_oscillator(0.5, 1), fuse=True)
    assert stats1.fft_passes == 2 and stats1.fft_1d_calls == 2

    co = schrodinger_coefficients(np.eye(2), ROT2, 0.1)
    prog = schrodinger_program(co)
    g2 = Grid((32, 32), ((-7.0, 7.0), (-7.0, 7.0)))
    _, stats2 = execute(gaussian(g2), prog, fuse=True)
    assert stats2.fft_passes == 4  # 2n with n = 2
    assert stats2.fft_1d_calls == 4 * 32
    report(9, "FFT counts", f"harmonic: {stats1.fft_passes} passes "
           f"({stats1.fft_1d_calls} line FFTs); Schrodinger n=2: "
           f"{stats2.fft_passes} passes == 2n")


# ---------------------------------------------------------------------------
def test_criterion_10_weyl_commutator_identity():
    """[q1^w, q2^w] = -i {q1,q2}^w on resolved modes, 20 random pairs."""
    rng = np.random.default_rng(110)
    g = Grid((48,), ((-8.0, 8.0),))
    vecs = localized_test_vectors(rng, g, count=3)
    worst = 0.0
    for _ in range(20):
        p1 = random_symbol(rng, 1, scale=0.8)
        p2 = random_symbol(rng, 1, scale=0.8)
        worst = max(worst, commutator_residual(p1, p2, g, vecs))
    assert worst <= 1e-8
    report(10, "Weyl commutator oracle", f"worst relative defect {worst:.2e} <= 1e-8")
