import numpy as np
import pytest

from conftest import expm_eig
from exactsplit.matfuncs import BranchCutError, expm, logm_principal, phi1, phi2


def test_expm_matches_eigendecomposition(rng):
    for _ in range(5):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert np.abs(expm(m) - expm_eig(m)).max() < 1e-11 * np.exp(np.abs(m).sum() / 4)


def test_phi_functions_match_series(rng):
    m = 0.3 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    s1 = np.zeros_like(m)
    s2 = np.zeros_like(m)
    term = np.eye(3, dtype=complex)
    fact = 1.0
    for k in range(30):
        fact *= k + 1
        s1 += term / fact           # m^k / (k+1)!
        fact2 = fact * (k + 2)
        s2 += term / fact2          # m^k / (k+2)!
        term = term @ m
    assert np.abs(phi1(m) - s1).max() < 1e-13
    assert np.abs(phi2(m) - s2).max() < 1e-13


def test_phi_functions_large_argument(rng):
    # identity e^z = 1 + z*phi1(z) holds at any scale
    m = 8.0 * rng.normal(size=(4, 4))
    lhs = expm(m)
    rhs = np.eye(4) + m @ phi1(m)
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(lhs).max()
    # and phi1(z) = 1 + z*phi2(z)
    assert np.abs(phi1(m) - np.eye(4) - m @ phi2(m)).max() < 1e-10 * np.abs(phi1(m)).max()


def test_logm_roundtrip(rng):
    m = 0.4 * rng.normal(size=(4, 4))
    assert np.abs(logm_principal(expm(m)) - m).max() < 1e-11


def test_logm_rejects_negative_axis():
    with pytest.raises(BranchCutError):
        logm_principal(np.diag([-1.0, 2.0]))
    with pytest.raises(BranchCutError):
        logm_principal(np.diag([-3.0 + 1e-12j, 1.0]))


def test_logm_real_output_for_real_input(rng):
    m = 0.2 * rng.normal(size=(3, 3))
    out = logm_principal(expm(m))
    assert np.isrealobj(out)
