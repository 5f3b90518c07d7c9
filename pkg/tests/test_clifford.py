import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracgap.clifford import (CliffordError, clifford_generators,
                               cr_endomorphism, omega_d_matrix)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_anticommutation_relations(n):
    alg = clifford_generators(n)
    g = alg.generators
    d = 2 * n
    for l in range(d):
        for m in range(d):
            anti = g[l] @ g[m] + g[m] @ g[l]
            target = -2.0 * np.eye(alg.dim_fiber) * (l == m)
            assert np.allclose(anti, target, atol=1e-14), (l, m)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generators_skew_adjoint_and_odd(n):
    alg = clifford_generators(n)
    parity = alg.parity
    for g in alg.generators:
        assert np.allclose(g.conj().T, -g, atol=1e-14)
        # c(v) swaps the two parity sectors
        assert np.allclose(parity[:, None] * g * parity[None, :], -g)


def test_basis_ordering_and_grading():
    alg = clifford_generators(2)
    assert alg.basis == ((), (1,), (2,), (1, 2))
    assert list(alg.degree_grading) == [0, 1, 1, 2]
    assert list(alg.parity) == [1, -1, -1, 1]
    assert alg.dim_fiber == 4


def test_wedge_contraction_duality():
    alg = clifford_generators(3)
    for j in range(3):
        w, c = alg.wedge[j], alg.contraction[j]
        assert np.allclose(c, w.conj().T)       # adjoint pair
        assert np.allclose(w @ w, 0)
        assert np.allclose(c @ c, 0)
        # CAR: w c + c w = identity
        assert np.allclose(w @ c + c @ w, np.eye(alg.dim_fiber))
        assert np.allclose(np.diag(w @ c).real, alg.number_ops[j])


def test_number_ops_count_occupancy():
    alg = clifford_generators(3)
    for i, s in enumerate(alg.basis):
        for j in range(3):
            assert alg.number_ops[j][i] == (1.0 if (j + 1) in s else 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.lists(st.floats(-2, 2), min_size=2, max_size=6))
def test_clifford_norm_identity(n, comps):
    # c(v)^2 = -|v|^2 for any real vector v
    alg = clifford_generators(n)
    v = np.zeros(2 * n)
    v[: min(len(comps), 2 * n)] = comps[: 2 * n]
    cv = np.tensordot(v, alg.generators, axes=(0, 0))
    assert np.allclose(cv @ cv, -float(v @ v) * np.eye(alg.dim_fiber),
                       atol=1e-12)


def test_omega_d_diagonal_values():
    alg = clifford_generators(1)
    od = omega_d_matrix(alg, (1.0,))
    assert np.allclose(od, np.diag([0.0, -2 * np.pi]))
    alg2 = clifford_generators(2)
    od2 = omega_d_matrix(alg2, (1.0, 2.0))
    # basis (), (1), (2), (1,2): -2 pi sum_{j in S} a_j
    assert np.allclose(np.diag(od2),
                       [0.0, -2 * np.pi, -4 * np.pi, -6 * np.pi])
    with pytest.raises(CliffordError):
        omega_d_matrix(alg2, (1.0,))
    with pytest.raises(CliffordError):
        omega_d_matrix(alg2, (1.0, -1.0))


def test_cr_endomorphism_hermitian():
    alg = clifford_generators(2)
    rng = np.random.default_rng(7)
    F = 1j * np.triu(rng.standard_normal((4, 4)), 1)
    F = F - F.T
    out = cr_endomorphism(alg, F)
    assert np.allclose(out, out.conj().T, atol=1e-12)
    assert np.allclose(cr_endomorphism(alg, np.zeros((4, 4))), 0)
    with pytest.raises(CliffordError, match="antisymmetric"):
        cr_endomorphism(alg, np.eye(4))
    with pytest.raises(CliffordError, match="2-form"):
        cr_endomorphism(alg, np.zeros((2, 2)))


def test_cr_matches_omega_d_for_scaled_symplectic_form():
    # F = -2 pi i a (e^{2j} ^ e^{2j-1}) reproduces omega_d up to the trace part:
    # sum_{l<m} F_lm c_l c_m with F_{2j-1,2j} purely imaginary gives
    # -2 pi a (2 N_j - 1) on the fiber, i.e. 2 omega_d + 2 pi sum a.
    for n, a in [(1, (1.0,)), (2, (1.0, 2.0))]:
        alg = clifford_generators(n)
        F = np.zeros((2 * n, 2 * n), dtype=complex)
        for j, aj in enumerate(a):
            F[2 * j, 2 * j + 1] = -2j * np.pi * aj
            F[2 * j + 1, 2 * j] = +2j * np.pi * aj
        out = cr_endomorphism(alg, F)
        expect = 2 * omega_d_matrix(alg, a) + 2 * np.pi * sum(a) * np.eye(2 ** n)
        assert np.allclose(out, expect, atol=1e-12)


def test_half_dimension_range():
    with pytest.raises(CliffordError):
        clifford_generators(0)
    with pytest.raises(CliffordError):
        clifford_generators(7)
    assert clifford_generators(6).dim_fiber == 64
