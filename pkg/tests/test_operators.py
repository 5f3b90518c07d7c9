import numpy as np
import pytest

from diracgap.clifford import clifford_generators
from diracgap.eigensolve import dense_spectrum
from diracgap.gauge import (apply_gauge, assign_line_bundle,
                            random_gauge_transform)
from diracgap.geometry import build_sphere_model, build_torus_model
from diracgap.operators import (OperatorError, compressed_basis,
                                covariant_laplacian, dirac_operator,
                                dirac_square, export_matrix_market,
                                lichnerowicz_rhs, restrict_parity,
                                schrodinger_operator, to_dense)


def _setup(n=1, N=8, k=1, rank_E=1, chern_E=None, a=None):
    a = a or (1.0,) * n
    m = build_torus_model(n, (1.0,) * (2 * n), N, a)
    g = assign_line_bundle(m, k, rank_E=rank_E, chern_E=chern_E)
    return m, g, clifford_generators(n)


def _check_hermitian(op, rng, trials=8):
    for _ in range(trials):
        u = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        lhs = np.vdot(u, op.matvec(v))
        rhs = np.vdot(op.matvec(u), v)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@pytest.mark.parametrize("n,N,k", [(1, 8, 1), (1, 16, 3), (2, 8, 1)])
def test_all_operators_hermitian(n, N, k):
    m, g, alg = _setup(n=n, N=N, k=k)
    rng = np.random.default_rng(11)
    for op in (covariant_laplacian(m, g), schrodinger_operator(m, g),
               dirac_operator(m, g, alg), lichnerowicz_rhs(m, g, alg)):
        _check_hermitian(op, rng)


def test_free_laplacian_fourier_oracle():
    # k = 0: eigenvalues are sums of 1d stencil values (2 - 2 cos(2 pi m/N))/h^2
    m, g, _ = _setup(N=6, k=0)
    vals = dense_spectrum(covariant_laplacian(m, g)).eigenvalues
    N, h = 6, m.spacing(0)
    one_d = [(2 - 2 * np.cos(2 * np.pi * q / N)) / h ** 2 for q in range(N)]
    expect = np.sort([a + b for a in one_d for b in one_d])
    assert np.allclose(vals, expect, atol=1e-9)


def test_landau_level_location():
    m, g, _ = _setup(N=12, k=2)
    vals = dense_spectrum(covariant_laplacian(m, g)).eigenvalues
    # lowest magnetic level near 2 pi k a = lambda k, degenerate of dim k
    assert vals[0] == pytest.approx(4 * np.pi, rel=0.05)
    assert vals[1] - vals[0] < 1e-8      # exact k-fold lattice degeneracy
    assert vals[2] - vals[1] > 1.0       # next level well separated


def test_schrodinger_is_shifted_laplacian():
    m, g, _ = _setup(N=6, k=2)
    lap = covariant_laplacian(m, g)
    sch = schrodinger_operator(m, g)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(lap.dim) + 1j * rng.standard_normal(lap.dim)
    assert np.allclose(sch.matvec(v), lap.matvec(v) - g.k * m.tau * v)
    assert sch.meta["shift"] == pytest.approx(2 * m.tau)


@pytest.mark.parametrize("n,N,k,rank_E,chern_E", [
    (1, 8, 1, 1, None),
    (1, 12, 1, 2, ((0,), (1,))),
    (2, 8, 1, 1, None),
])
def test_square_identity_exact(n, N, k, rank_E, chern_E):
    m, g, alg = _setup(n=n, N=N, k=k, rank_E=rank_E, chern_E=chern_E)
    D = dirac_operator(m, g, alg)
    rhs = lichnerowicz_rhs(m, g, alg)
    rng = np.random.default_rng(17)
    for _ in range(10):
        v = rng.standard_normal(D.dim) + 1j * rng.standard_normal(D.dim)
        v /= np.linalg.norm(v)
        left = D.matvec(D.matvec(v))
        right = rhs.matvec(v)
        assert np.linalg.norm(left - right) <= 1e-10 * np.linalg.norm(right)


def test_dirac_swaps_parity():
    m, g, alg = _setup(N=8, k=1)
    D = dirac_operator(m, g, alg)
    assert D.parity_swap and D.grading == "degree"
    parity = np.where(D.degree_labels % 2 == 0, 1.0, -1.0)
    rng = np.random.default_rng(5)
    v = rng.standard_normal(D.dim) + 1j * rng.standard_normal(D.dim)
    assert np.allclose(parity * D.matvec(parity * v), -D.matvec(v))


def test_kernel_dimension_and_chirality():
    # k = 2, one plane: kernel of the deflated D^2 is 2-dimensional and even
    m, g, alg = _setup(N=12, k=2)
    sq = dirac_square(dirac_operator(m, g, alg))
    res = dense_spectrum(sq)
    thresh = 1e-6 * 2 * g.k * m.lam
    kernel = res.eigenvalues < thresh
    assert int(kernel.sum()) == 2
    assert all(res.labels[i] == 0 for i in np.nonzero(kernel)[0])


def test_flux_free_kernel_is_two_constants():
    # k = 0: no constraints, flat harmonics in both degrees
    m, g, alg = _setup(N=6, k=0)
    D = dirac_operator(m, g, alg)
    assert D.constraints is None
    res = dense_spectrum(dirac_square(D))
    assert int((res.eigenvalues < 1e-10).sum()) == 2


def test_flux_free_momentum_doublers_deflated():
    # resolutions divisible by 4 admit one free doubler per degree; they
    # are deflated, leaving the two constant harmonics
    m, g, alg = _setup(N=8, k=0)
    D = dirac_operator(m, g, alg)
    assert D.constraints is not None and D.constraints.shape[1] == 2
    res = dense_spectrum(dirac_square(D))
    assert int((res.eigenvalues < 1e-10).sum()) == 2


def test_constraints_are_orthonormal_and_invariant():
    m, g, alg = _setup(N=12, k=2)
    sq = dirac_square(dirac_operator(m, g, alg))
    H = sq.constraints
    assert H is not None
    assert np.allclose(H.conj().T @ H, np.eye(H.shape[1]), atol=1e-12)
    # the physical complement is invariant: H* A (1 - H H*) = 0
    rng = np.random.default_rng(23)
    v = rng.standard_normal(sq.dim) + 1j * rng.standard_normal(sq.dim)
    v = sq.project_out_constraints(v)
    leak = np.linalg.norm(H.conj().T @ sq.matvec(v))
    assert leak <= 1e-6 * np.linalg.norm(sq.matvec(v))


def test_gauge_covariance_pointwise():
    # transformed operator equals conjugation by the site phases
    m, g, alg = _setup(N=6, k=1)
    rng = np.random.default_rng(41)
    phases = np.exp(2j * np.pi * rng.random(g.lattice_shape))
    g2 = apply_gauge(g, phases)
    for build in (covariant_laplacian, schrodinger_operator):
        A = build(m, g)
        B = build(m, g2)
        diag = np.tile(phases.reshape(-1), g.rank_E)
        v = rng.standard_normal(A.dim) + 1j * rng.standard_normal(A.dim)
        assert np.allclose(B.matvec(diag * v), diag * A.matvec(v), atol=1e-10)


def test_gauge_invariant_spectrum():
    m, g, alg = _setup(N=8, k=1)
    a = dense_spectrum(dirac_square(dirac_operator(m, g, alg))).eigenvalues
    g2 = random_gauge_transform(g, seed=9)
    b = dense_spectrum(dirac_square(dirac_operator(m, g2, alg))).eigenvalues
    assert np.allclose(a, b, atol=1e-9 * max(1.0, abs(a[-1])))


def test_parity_blocks_supersymmetric():
    m, g, alg = _setup(N=8, k=1)
    sq = dirac_square(dirac_operator(m, g, alg))
    even = restrict_parity(sq, "even")
    odd = restrict_parity(sq, "odd")
    assert even.dim + odd.dim == sq.dim
    ev = dense_spectrum(even).eigenvalues
    od = dense_spectrum(odd).eigenvalues
    thresh = 1e-6 * 2 * g.k * m.lam
    assert int((ev < thresh).sum()) == 1      # index k = 1
    assert int((od < thresh).sum()) == 0
    # nonzero spectra pair up between the parities
    nz = ev[ev >= thresh]
    assert np.allclose(nz, od, atol=1e-8 * max(1.0, od[-1]))


def test_restrict_parity_of_dirac_is_rectangular():
    m, g, alg = _setup(N=8, k=1)
    D = dirac_operator(m, g, alg)
    plus = restrict_parity(D, "even")
    assert not plus.hermitian
    v = np.zeros(plus.dim, dtype=complex)
    v[0] = 1.0
    assert plus.matvec(v).shape == (D.dim - plus.dim,)
    with pytest.raises(OperatorError):
        restrict_parity(covariant_laplacian(m, g), "even")
    with pytest.raises(OperatorError):
        restrict_parity(D, "both")


def test_compressed_basis_properties():
    m, g, alg = _setup(N=12, k=2)
    sq = dirac_square(dirac_operator(m, g, alg))
    Q, labels = compressed_basis(sq)
    assert Q.shape == (sq.dim, sq.physical_dim)
    assert np.allclose(Q.conj().T @ Q, np.eye(sq.physical_dim), atol=1e-12)
    assert np.allclose(sq.constraints.conj().T @ Q, 0, atol=1e-12)
    assert labels.shape == (sq.physical_dim,)


def test_matrix_market_roundtrip(tmp_path):
    m, g, _ = _setup(N=4, k=1)
    op = covariant_laplacian(m, g)
    path = tmp_path / "lap.mtx"
    export_matrix_market(op, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("%%MatrixMarket")
    dims = lines[1].split()
    assert int(dims[0]) == op.dim
    A = np.zeros((op.dim, op.dim), dtype=complex)
    for ln in lines[2:]:
        r, c, re, im = ln.split()
        A[int(r) - 1, int(c) - 1] = float(re) + 1j * float(im)
    assert np.allclose(A, to_dense(op), atol=1e-14)


def test_assembly_validation():
    sphere = build_sphere_model(1.0, 2)
    torus, g, alg = _setup(N=6, k=1)
    with pytest.raises(OperatorError, match="torus"):
        covariant_laplacian(sphere, g)
    alg2 = clifford_generators(2)
    with pytest.raises(OperatorError):
        dirac_operator(torus, g, alg2)
    with pytest.raises(OperatorError, match="negative"):
        g_neg = assign_line_bundle(torus, 1, rank_E=1, chern_E=((-2,),))
        dirac_operator(torus, g_neg, alg)
    with pytest.raises(OperatorError, match="dense cap"):
        big_m = build_torus_model(2, (1.0,) * 4, 10, (1.0, 1.0))
        big_g = assign_line_bundle(big_m, 1)
        to_dense(covariant_laplacian(big_m, big_g))
