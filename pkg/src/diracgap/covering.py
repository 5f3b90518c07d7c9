"""Finite-quotient approximation of per-unit-cell spectral counts on the
universal cover of the torus: the same local geometry and flux density on a
family of quotients of growing fundamental domain, with eigenvalue counts
normalized by the cell count.  For the gapped windows these normalized
counts are exact integers independent of the scale, which is the quantity
the verdicts check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import index_prediction, kernel_split, kernel_threshold
from .clifford import clifford_generators
from .eigensolve import EigenRequest, dense_spectrum, lanczos_smallest
from .gauge import GaugeField, assign_line_bundle
from .geometry import ManifoldKind, ModelManifold, build_torus_model
from .operators import (DENSE_DIM_CAP, dirac_operator, dirac_square,
                        restrict_parity, schrodinger_operator)

__all__ = [
    "CoveringError",
    "QuotientFamily",
    "GammaTraceEstimate",
    "build_quotient_family",
    "gamma_spectrum_distribution",
    "gamma_index_check",
    "translate_links",
]

OPERATOR_SIZE_CAP = 250_000


class CoveringError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuotientFamily:
    base_model: ModelManifold
    base_gauge: GaugeField
    scales: tuple[int, ...]
    models: dict                # scale -> ModelManifold
    gauges: dict                # scale -> GaugeField

    def cells(self, m: int) -> int:
        return m ** (2 * self.base_model.n)


@dataclass
class GammaTraceEstimate:
    mu_grid: np.ndarray
    counts: dict                 # scale -> normalized counts N_m(mu) per mu
    limit: np.ndarray            # largest-scale row
    converged: bool
    tolerance: float
    notes: list = field(default_factory=list)


def build_quotient_family(model: ModelManifold, gauge: GaugeField,
                          scales) -> QuotientFamily:
    """Quotients of scale m: sides m*l, resolution m*N, identical spacing,
    J0 eigenvalues and flux per plaquette; total flux grows like m^2 per
    plane.  Scale 1 reuses the base objects so operators are bit-identical."""
    if model.kind is not ManifoldKind.FLAT_TORUS:
        raise CoveringError("quotient families are defined over the torus")
    scales = tuple(int(m) for m in scales)
    if not scales or any(m < 1 for m in scales) or list(scales) != sorted(set(scales)):
        raise CoveringError("scales must be a finite increasing list of "
                            "positive integers")
    fiber = 2 ** model.n
    models, gauges = {}, {}
    for m in scales:
        if m == 1:
            models[m], gauges[m] = model, gauge
            continue
        dim = fiber * gauge.rank_E * (m * model.resolution) ** (2 * model.n)
        if dim > OPERATOR_SIZE_CAP:
            raise CoveringError(
                f"scale {m} needs operator dimension {dim} > cap "
                f"{OPERATOR_SIZE_CAP}"
            )
        scaled = build_torus_model(
            model.n,
            tuple(m * s for s in model.sides),
            m * model.resolution,
            model.j0_eigenvalues,
        )
        gauges[m] = assign_line_bundle(
            scaled, gauge.k,
            rank_E=gauge.rank_E,
            chern_E=tuple(tuple(m * m * e for e in row)
                          for row in gauge.chern_E),
        )
        models[m] = scaled
    return QuotientFamily(base_model=model, base_gauge=gauge, scales=scales,
                          models=models, gauges=gauges)


DENSE_PREFERRED_DIM = 600


def _low_spectrum(op, want: int, seed: int = 2024) -> np.ndarray:
    if op.dim <= DENSE_PREFERRED_DIM or (want >= op.physical_dim - 2
                                         and op.dim <= DENSE_DIM_CAP):
        return dense_spectrum(op).eigenvalues
    if want >= op.physical_dim - 2:
        raise CoveringError(
            f"cannot compute {want} eigenvalues of a dimension-"
            f"{op.physical_dim} operator above the dense cap"
        )
    res = lanczos_smallest(EigenRequest(op, count=want, tol=1e-9, seed=seed))
    if not res.converged:
        raise CoveringError("eigensolver did not converge: " +
                            "; ".join(res.warnings))
    return res.eigenvalues


def gamma_spectrum_distribution(family: QuotientFamily, operator_kind: str,
                                mu_grid, tolerance: float = 1e-6,
                                extra: int = 4) -> GammaTraceEstimate:
    """Normalized counting functions N_m(mu) = #{eigenvalues <= mu} / m^2n
    across the family; converged when the two largest scales agree on the
    whole grid within the tolerance."""
    mu_grid = np.asarray(sorted(mu_grid), dtype=float)
    counts: dict[int, np.ndarray] = {}
    for m in family.scales:
        model, gauge = family.models[m], family.gauges[m]
        if operator_kind == "schrodinger":
            op = schrodinger_operator(model, gauge)
        elif operator_kind == "dirac_square":
            alg = clifford_generators(model.n)
            op = dirac_square(dirac_operator(model, gauge, alg))
        else:
            raise CoveringError(f"unknown operator kind {operator_kind!r}")
        pred = index_prediction(model, gauge, gauge.k)
        want = pred.d_k + extra if op.dim > DENSE_DIM_CAP else op.dim
        vals = _low_spectrum(op, want)
        if vals[-1] < mu_grid[-1]:
            raise CoveringError(
                f"scale {m}: computed spectrum tops out at {vals[-1]:.4f} "
                f"below the grid maximum {mu_grid[-1]:.4f}"
            )
        cells = family.cells(m)
        counts[m] = np.array([
            np.count_nonzero(vals <= mu) / cells for mu in mu_grid
        ])
    scales = family.scales
    converged = True
    notes: list[str] = []
    if len(scales) >= 2:
        a, b = counts[scales[-2]], counts[scales[-1]]
        if np.max(np.abs(a - b)) > tolerance:
            converged = False
            notes.append(
                f"scales {scales[-2]} and {scales[-1]} disagree by "
                f"{np.max(np.abs(a - b)):.3e} > {tolerance:g}"
            )
    return GammaTraceEstimate(mu_grid=mu_grid, counts=counts,
                              limit=counts[scales[-1]], converged=converged,
                              tolerance=tolerance, notes=notes)


@dataclass
class GammaIndexVerdict:
    k: int
    per_scale_kernel: dict        # scale -> even-sector kernel dim
    per_scale_normalized: dict    # scale -> kernel dim / cells
    per_scale_odd_min: dict       # scale -> smallest odd-sector eigenvalue
    base_index: int
    ok: bool
    reasons: list = field(default_factory=list)


def gamma_index_check(family: QuotientFamily, k: int | None = None) -> GammaIndexVerdict:
    """Per-unit-cell kernel dimension of the even-sector Dirac block must be
    scale independent and equal to the base index; the odd sector must be
    kernel-free at every scale."""
    gauge = family.base_gauge
    if k is not None and k != gauge.k:
        raise CoveringError(
            f"family was built at tensor power {gauge.k}, requested {k}"
        )
    k = gauge.k
    if k < 1:
        raise CoveringError("the index statement is asymptotic; k >= 1 required")
    base_pred = index_prediction(family.base_model, gauge, k)
    kernels: dict[int, int] = {}
    normalized: dict[int, float] = {}
    odd_minima: dict[int, float] = {}
    reasons: list[str] = []
    ok = True
    for m in family.scales:
        model, g = family.models[m], family.gauges[m]
        alg = clifford_generators(model.n)
        sq = dirac_square(dirac_operator(model, g, alg))
        even = restrict_parity(sq, "even")
        odd = restrict_parity(sq, "odd")
        expected = base_pred.d_k * family.cells(m)
        vals = _low_spectrum(even, expected + 4, seed=97 + m)
        dim, _ = kernel_split(vals, k, model.lam)
        kernels[m] = dim
        normalized[m] = dim / family.cells(m)
        odd_min = float(_low_spectrum(odd, 1, seed=311 + m)[0])
        odd_minima[m] = odd_min
        if normalized[m] != base_pred.d_k:
            ok = False
            reasons.append(
                f"scale {m}: normalized kernel {normalized[m]} != base index "
                f"{base_pred.d_k}"
            )
        if odd_min < kernel_threshold(k, model.lam):
            ok = False
            reasons.append(
                f"scale {m}: odd sector has a kernel candidate at {odd_min:.3e}"
            )
    return GammaIndexVerdict(
        k=k, per_scale_kernel=kernels, per_scale_normalized=normalized,
        per_scale_odd_min=odd_minima, base_index=base_pred.d_k, ok=ok,
        reasons=reasons,
    )


def translate_links(gauge: GaugeField, shifts) -> GaugeField:
    """Translate every link field by whole lattice steps; combined with the
    flux uniformity this is a deck transformation up to gauge, so all
    downstream spectra must be unchanged."""
    shifts = tuple(int(s) for s in shifts)
    if len(shifts) != 2 * gauge.n:
        raise CoveringError(f"need {2 * gauge.n} shift components")
    links = gauge.links
    for mu, s in enumerate(shifts):
        if s:
            links = np.roll(links, s, axis=2 + mu)
    return GaugeField(
        n=gauge.n, resolution=gauge.resolution, k=gauge.k, chern=gauge.chern,
        rank_E=gauge.rank_E, chern_E=gauge.chern_E, links=links,
    )
