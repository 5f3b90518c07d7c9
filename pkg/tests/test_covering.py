import numpy as np
import pytest

from diracgap.clifford import clifford_generators
from diracgap.covering import (CoveringError, build_quotient_family,
                               gamma_index_check, gamma_spectrum_distribution,
                               translate_links)
from diracgap.eigensolve import dense_spectrum
from diracgap.gauge import assign_line_bundle, plaquette_phases
from diracgap.geometry import build_sphere_model, build_torus_model
from diracgap.operators import dirac_operator, dirac_square


def _base(N=8, k=2):
    m = build_torus_model(1, (1.0, 1.0), N, (1.0,))
    return m, assign_line_bundle(m, k)


def test_family_construction():
    m, g = _base()
    fam = build_quotient_family(m, g, (1, 2))
    assert fam.scales == (1, 2)
    assert fam.cells(1) == 1 and fam.cells(2) == 4
    # scale 1 reuses the base objects bit-identically
    assert fam.models[1] is m and fam.gauges[1] is g
    m2, g2 = fam.models[2], fam.gauges[2]
    assert m2.resolution == 16 and m2.sides == (2.0, 2.0)
    assert m2.spacing(0) == m.spacing(0)
    # same local flux density: plaquette phases agree pointwise
    assert plaquette_phases(g2, 0, 0).flat[0] == pytest.approx(
        plaquette_phases(g, 0, 0).flat[0])
    assert g2.k == g.k


def test_family_scales_auxiliary_twists():
    m = build_torus_model(1, (1.0, 1.0), 8, (1.0,))
    g = assign_line_bundle(m, 1, rank_E=2, chern_E=((0,), (1,)))
    fam = build_quotient_family(m, g, (2,))
    assert fam.gauges[2].chern_E == ((0,), (4,))


def test_family_validation():
    m, g = _base()
    with pytest.raises(CoveringError):
        build_quotient_family(m, g, ())
    with pytest.raises(CoveringError):
        build_quotient_family(m, g, (2, 1))
    with pytest.raises(CoveringError):
        build_quotient_family(m, g, (1, 1))
    with pytest.raises(CoveringError):
        build_quotient_family(m, g, (0, 2))
    sphere = build_sphere_model(1.0, 1)
    with pytest.raises(CoveringError, match="torus"):
        build_quotient_family(sphere, g, (1,))
    big_m = build_torus_model(2, (1.0,) * 4, 8, (1.0, 1.0))
    big_g = assign_line_bundle(big_m, 1)
    with pytest.raises(CoveringError, match="cap"):
        build_quotient_family(big_m, big_g, (2,))


def test_translate_links_preserves_spectrum():
    m, g = _base(k=1)
    alg = clifford_generators(1)
    ref = dense_spectrum(dirac_square(dirac_operator(m, g, alg))).eigenvalues
    shifted = translate_links(g, (3, 5))
    got = dense_spectrum(dirac_square(dirac_operator(m, shifted, alg))).eigenvalues
    assert np.allclose(ref, got, atol=1e-9 * max(1.0, ref[-1]))
    with pytest.raises(CoveringError):
        translate_links(g, (1,))


def test_gamma_index_check_scale_independent():
    m, g = _base(N=12, k=2)
    fam = build_quotient_family(m, g, (1, 2))
    v = gamma_index_check(fam)
    assert v.ok, v.reasons
    assert v.base_index == 2
    assert v.per_scale_kernel == {1: 2, 2: 8}
    assert v.per_scale_normalized == {1: 2.0, 2: 2.0}
    assert all(x > 1.0 for x in v.per_scale_odd_min.values())
    with pytest.raises(CoveringError):
        gamma_index_check(fam, k=3)


def test_gamma_index_check_requires_positive_power():
    m = build_torus_model(1, (1.0, 1.0), 8, (1.0,))
    g = assign_line_bundle(m, 0)
    fam = build_quotient_family(m, g, (1,))
    with pytest.raises(CoveringError, match="k >= 1"):
        gamma_index_check(fam)


def test_gamma_spectrum_distribution_converges():
    m, g = _base(N=8, k=1)
    fam = build_quotient_family(m, g, (1, 2))
    lam = m.lam
    est = gamma_spectrum_distribution(fam, "schrodinger", [lam, 3 * lam])
    assert est.converged, est.notes
    # one state per unit cell below the gap edge
    assert est.counts[1][0] == pytest.approx(1.0)
    assert est.counts[2][0] == pytest.approx(1.0)
    assert np.array_equal(est.limit, est.counts[2])
    assert np.all(np.diff(est.limit) >= 0)


def test_gamma_spectrum_distribution_errors():
    m, g = _base(N=8, k=1)
    fam = build_quotient_family(m, g, (1,))
    with pytest.raises(CoveringError, match="operator kind"):
        gamma_spectrum_distribution(fam, "heat_kernel", [1.0])
    with pytest.raises(CoveringError, match="tops out"):
        gamma_spectrum_distribution(fam, "schrodinger", [1e9])
