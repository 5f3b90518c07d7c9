"""Turning spectra into verdicts: gap detection for the squared Dirac
operator, cluster counting for the shifted Schrodinger operator, the
closed-form index predictions, the kernel-component decay fit, and the
analytic sphere backend (charged-Laplacian spectra in closed form).

Kernel convention used throughout: eigenvalues below 1e-6 * (2 k lambda)
count as kernel, and the first eigenvalue above the threshold must exceed
the largest kernel candidate by a factor of 1e3, otherwise the split is
refused rather than guessed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gauge import GaugeField
from .geometry import ManifoldKind, ModelManifold

__all__ = [
    "AnalysisError",
    "GapReport",
    "IndexPrediction",
    "SphereOracle",
    "DecayReport",
    "SchrodingerVerdict",
    "kernel_threshold",
    "kernel_split",
    "verify_gap",
    "verify_schrodinger",
    "index_prediction",
    "kernel_component_decay",
    "fit_decay_slope",
    "sphere_oracle",
    "sphere_report",
    "model_id",
    "spectrum_csv_rows",
    "make_report",
    "write_report",
]

KERNEL_REL_THRESHOLD = 1e-6
KERNEL_SEPARATION = 1e3


class AnalysisError(RuntimeError):
    pass


def model_id(model: ModelManifold) -> str:
    if model.kind is ManifoldKind.FLAT_TORUS:
        return (f"flat_torus(n={model.n},N={model.resolution},"
                f"sides={list(model.sides)},a={list(model.j0_eigenvalues)})")
    return f"round_sphere(r={model.radius},flux={model.chern[0]})"


def kernel_threshold(k: int, lam: float) -> float:
    return KERNEL_REL_THRESHOLD * 2.0 * k * lam


def kernel_split(eigenvalues: np.ndarray, k: int, lam: float) -> tuple[int, float]:
    """(kernel dimension, smallest nonzero eigenvalue) with the separation
    guard; eigenvalues must be sorted ascending and contain at least one
    value above the threshold."""
    vals = np.asarray(eigenvalues, dtype=float)
    thr = kernel_threshold(k, lam)
    below = np.abs(vals) < thr
    dim = int(np.count_nonzero(below))
    if dim == vals.size:
        raise AnalysisError(
            "all computed eigenvalues lie below the kernel threshold; "
            "compute more of the spectrum"
        )
    first_nonzero = float(vals[dim])
    top_kernel = float(np.abs(vals[:dim]).max()) if dim else 0.0
    if dim and top_kernel * KERNEL_SEPARATION > first_nonzero:
        raise AnalysisError(
            f"kernel split indeterminate at k={k}: largest kernel candidate "
            f"{top_kernel:.3e} vs first nonzero {first_nonzero:.3e} "
            f"(separation < {KERNEL_SEPARATION:g})"
        )
    return dim, first_nonzero


@dataclass
class GapReport:
    k: int
    lam: float
    kernel_dim: int
    predicted_kernel: int
    smallest_nonzero: float
    c_fit: float
    odd_min: float | None = None

    @property
    def gap_edge(self) -> float:
        return 2.0 * self.k * self.lam


def verify_gap(
    spectra: dict[int, np.ndarray],
    odd_minima: dict[int, float],
    model: ModelManifold,
    predictions: dict[int, int],
    slope_cap: float | None = None,
) -> tuple[list[GapReport], bool, dict]:
    """Gap verdict over a k-sweep of squared-Dirac spectra.

    PASS iff the fitted constants C_k = max(0, 2 k lambda - first nonzero)
    show no growth trend (fitted slope <= slope_cap, default 0.05 * 2
    lambda), kernel dimensions match the index predictions, and the
    odd-sector minima clear 2 k lambda - max C_k.
    """
    lam = model.lam
    if slope_cap is None:
        slope_cap = 0.05 * 2.0 * lam
    reports: list[GapReport] = []
    reasons: list[str] = []
    for k in sorted(spectra):
        if k == 0:
            continue  # asymptotic statement: k = 0 excluded by contract
        dim, first = kernel_split(spectra[k], k, lam)
        c_fit = max(0.0, 2.0 * k * lam - first)
        reports.append(GapReport(
            k=k, lam=lam, kernel_dim=dim, predicted_kernel=predictions[k],
            smallest_nonzero=first, c_fit=c_fit, odd_min=odd_minima.get(k),
        ))
    if not reports:
        raise AnalysisError("no k >= 1 spectra supplied")
    ks = np.array([r.k for r in reports], dtype=float)
    cs = np.array([r.c_fit for r in reports])
    slope = float(np.polyfit(ks, cs, 1)[0]) if len(reports) > 1 else 0.0
    max_c = float(cs.max())
    ok = True
    if slope > slope_cap:
        ok = False
        reasons.append(f"C_fit grows with k: slope {slope:.4f} > cap {slope_cap:.4f}")
    for r in reports:
        if r.kernel_dim != r.predicted_kernel:
            ok = False
            reasons.append(
                f"k={r.k}: kernel dim {r.kernel_dim} != predicted "
                f"{r.predicted_kernel}"
            )
        if (r.odd_min is not None
                and r.odd_min < r.gap_edge - max_c - 1e-8 * r.gap_edge):
            ok = False
            reasons.append(
                f"k={r.k}: odd-sector minimum {r.odd_min:.6f} below "
                f"{r.gap_edge - max_c:.6f}"
            )
    return reports, ok, {"slope": slope, "max_c_fit": max_c,
                         "slope_cap": slope_cap, "reasons": reasons}


@dataclass
class SchrodingerVerdict:
    a: float
    b: float
    counts: dict
    predictions: dict
    ok: bool
    reasons: list = field(default_factory=list)


def verify_schrodinger(
    spectra: dict[int, np.ndarray],
    model: ModelManifold,
    predictions: dict[int, int],
) -> SchrodingerVerdict:
    """Cluster verdict for the shifted Schrodinger sweep: a single window
    half-width `a` (half the first-nonzero-cluster location of the smallest
    k, held fixed across the sweep) must capture exactly the predicted
    count, and an exhibited `b` must leave [a, 2 k lambda - b] empty."""
    lam = model.lam
    ks = sorted(k for k in spectra if k >= 1)
    if not ks:
        raise AnalysisError("no k >= 1 spectra supplied")
    v0 = np.sort(np.asarray(spectra[ks[0]], dtype=float))
    guess = ks[0] * lam / 2.0   # quarter of the expected gap scale
    above = v0[v0 >= guess]
    if above.size == 0:
        raise AnalysisError("no eigenvalue beyond the expected cluster; "
                            "compute more of the spectrum")
    a = float(above[0]) / 2.0
    cluster = v0[v0 < guess]
    if cluster.size and float(np.abs(cluster).max()) >= a:
        raise AnalysisError("cluster split failed: window edge inside cluster")
    counts: dict[int, int] = {}
    firsts: dict[int, float] = {}
    reasons: list[str] = []
    ok = True
    for k in ks:
        vals = np.sort(np.asarray(spectra[k], dtype=float))
        inside = (vals > -a) & (vals < a)
        counts[k] = int(np.count_nonzero(inside))
        above = vals[vals >= a]
        if above.size == 0:
            raise AnalysisError(f"k={k}: no eigenvalue above the window; "
                                "compute more of the spectrum")
        firsts[k] = float(above[0])
        if counts[k] != predictions[k]:
            ok = False
            reasons.append(f"k={k}: count {counts[k]} != predicted {predictions[k]}")
    b = max(0.0, max(2.0 * k * lam - firsts[k] for k in ks)) * (1 + 1e-9) + 1e-12
    for k in ks:
        hi = 2.0 * k * lam - b
        if hi > a and firsts[k] < hi:
            ok = False
            reasons.append(
                f"k={k}: eigenvalue {firsts[k]:.6f} inside the forbidden "
                f"band [{a:.6f}, {hi:.6f}]"
            )
    return SchrodingerVerdict(a=a, b=b, counts=counts,
                              predictions=dict(predictions), ok=ok,
                              reasons=reasons)


@dataclass
class IndexPrediction:
    model: str
    k: int
    rank_E: int
    chern_L: tuple[int, ...]
    chern_E: tuple[tuple[int, ...], ...]
    d_k: int
    leading_term: float


def index_prediction(model: ModelManifold, gauge: GaugeField | None, k: int,
                     rank_E: int | None = None,
                     chern_E: tuple[tuple[int, ...], ...] | None = None) -> IndexPrediction:
    """Closed-form count of the low cluster: the Chern-character pairing of
    the twisted bundle with the Todd class, evaluated per model.

    Torus: sum over E components of prod_j (k c_j + e_{i,j}).
    Sphere: sum over E components of (k c + e_i + 1).
    The leading term is k^n * rank(E) * symplectic volume in both cases.
    """
    if gauge is not None:
        rank_E = gauge.rank_E
        chern_E = gauge.chern_E
    if rank_E is None:
        rank_E = 1
    if chern_E is None:
        chern_E = tuple((0,) * model.n for _ in range(rank_E))
    chern_L = model.chern
    n = model.n
    if model.kind is ManifoldKind.FLAT_TORUS:
        d_k = sum(
            int(np.prod([k * chern_L[j] + chern_E[i][j] for j in range(n)]))
            for i in range(rank_E)
        )
    elif model.kind is ManifoldKind.ROUND_SPHERE:
        d_k = sum(k * chern_L[0] + chern_E[i][0] + 1 for i in range(rank_E))
    else:  # pragma: no cover
        raise AnalysisError(f"unsupported model kind {model.kind}")
    leading = float(k ** n * rank_E * model.volume)
    return IndexPrediction(
        model=model_id(model), k=k, rank_E=rank_E, chern_L=chern_L,
        chern_E=chern_E, d_k=int(d_k), leading_term=leading,
    )


@dataclass
class DecayReport:
    rho: dict                      # k -> max over kernel vectors of |s'|/|s0|
    max_rho_sqrt_k: float
    slope: float | None            # log-log fit, None when rho hits the floor
    ok: bool
    reasons: list = field(default_factory=list)


RHO_FLOOR = 1e-13


def fit_decay_slope(ks, rhos) -> float:
    ks = np.asarray(ks, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    if np.any(rhos <= 0):
        raise AnalysisError("decay fit needs strictly positive ratios")
    return float(np.polyfit(np.log(ks), np.log(rhos), 1)[0])


def kernel_component_decay(
    vectors_by_k: dict[int, np.ndarray],
    degree_labels: np.ndarray,
    bound: float = 1.0,
) -> DecayReport:
    """Positive-degree to degree-0 norm ratios of kernel vectors across the
    sweep.  Hard failure if any kernel vector has (numerically) no degree-0
    component; PASS iff max_k rho_k * sqrt(k) <= bound and, when the ratios
    are above the rounding floor, the fitted log-log slope is <= -0.4."""
    zero_mask = degree_labels == 0
    rho: dict[int, float] = {}
    for k, vecs in sorted(vectors_by_k.items()):
        V = np.atleast_2d(np.asarray(vecs, dtype=complex).T).T
        worst = 0.0
        for c in range(V.shape[1]):
            v = V[:, c]
            s0 = np.linalg.norm(v[zero_mask])
            sp = np.linalg.norm(v[~zero_mask])
            total = np.linalg.norm(v)
            if s0 < 1e-8 * total:
                raise AnalysisError(
                    f"k={k}, kernel vector {c}: degree-0 component is "
                    f"numerically zero (|s0|={s0:.3e}, |s|={total:.3e})"
                )
            worst = max(worst, sp / s0)
        rho[k] = worst
    ks = np.array(sorted(rho))
    rr = np.array([rho[k] for k in ks])
    max_scaled = float((rr * np.sqrt(ks)).max())
    reasons: list[str] = []
    ok = max_scaled <= bound
    if not ok:
        reasons.append(f"max rho_k sqrt(k) = {max_scaled:.3e} > {bound}")
    slope = None
    if np.all(rr > RHO_FLOOR) and len(ks) > 1:
        slope = fit_decay_slope(ks, rr)
        if slope > -0.4:
            ok = False
            reasons.append(f"fitted decay slope {slope:.3f} > -0.4")
    return DecayReport(rho=rho, max_rho_sqrt_k=max_scaled, slope=slope,
                       ok=ok, reasons=reasons)


@dataclass
class SphereOracle:
    """Closed-form spectrum of the charged Laplacian on the round sphere:
    for monopole charge q = k * flux / 2, eigenvalues (l(l+1) - q^2)/r^2
    with l = q, q+1, ... and multiplicity 2l+1."""
    k: int
    q: float
    radius: float
    levels: np.ndarray            # l values
    eigenvalues: np.ndarray       # Laplacian eigenvalues per level
    shifted: np.ndarray           # same minus k*tau
    multiplicities: np.ndarray


def sphere_oracle(model: ModelManifold, k: int, num_levels: int = 8) -> SphereOracle:
    if model.kind is not ManifoldKind.ROUND_SPHERE:
        raise AnalysisError("sphere oracle needs a round-sphere model")
    flux = model.chern[0]
    q = k * flux / 2.0
    r2 = model.radius ** 2
    ls = q + np.arange(num_levels)
    eig = (ls * (ls + 1) - q ** 2) / r2
    shifted = eig - k * model.tau
    mult = (2 * ls + 1).astype(int)
    return SphereOracle(k=k, q=q, radius=model.radius, levels=ls,
                        eigenvalues=eig, shifted=shifted,
                        multiplicities=mult)


def sphere_report(model: ModelManifold, ks, rank_E: int = 1,
                  chern_E: tuple[tuple[int, ...], ...] | None = None) -> list[dict]:
    """Per-k analytic clusters and counts for the sphere backend; for
    twisted E each component contributes its own monopole series."""
    if chern_E is None:
        chern_E = tuple((0,) * model.n for _ in range(rank_E))
    out = []
    for k in ks:
        pred = index_prediction(model, None, k, rank_E=rank_E, chern_E=chern_E)
        oracle = sphere_oracle(model, k)
        d_obs = sum(int(2 * ((k * model.chern[0] + chern_E[i][0]) / 2.0) + 1)
                    for i in range(rank_E))
        gap_location = float(oracle.shifted[1])
        out.append({
            "k": k,
            "d_k_observed": d_obs,
            "d_k_predicted": pred.d_k,
            "lowest_cluster": float(oracle.shifted[0]),
            "lowest_multiplicity": int(oracle.multiplicities[0]),
            "gap_location": gap_location,
            "two_k_lambda": 2.0 * k * model.lam,
        })
    return out


def spectrum_csv_rows(k: int, eigenvalues: np.ndarray,
                      degrees: np.ndarray | None = None) -> list[str]:
    rows = ["k,index,eigenvalue,parity,degree"]
    for i, v in enumerate(np.asarray(eigenvalues, dtype=float)):
        if degrees is None:
            deg, parity = 0, "even"
        else:
            deg = int(degrees[i])
            parity = "even" if deg % 2 == 0 else "odd"
        rows.append(f"{k},{i},{float(v)!r},{parity},{deg}")
    return rows


def make_report(model: ModelManifold, ks, eigenvalues_by_k: dict,
                d_k_observed: dict, d_k_predicted: dict,
                c_fit: dict | None, verdicts: dict,
                config_echo: dict | None = None) -> dict:
    return {
        "model": model_id(model),
        "k": list(ks),
        "lambda": model.lam,
        "tau": model.tau,
        "eigenvalues": {str(k): [float(v) for v in eigenvalues_by_k[k]]
                        for k in eigenvalues_by_k},
        "d_k_observed": {str(k): int(v) for k, v in d_k_observed.items()},
        "d_k_predicted": {str(k): int(v) for k, v in d_k_predicted.items()},
        "C_fit": ({str(k): float(v) for k, v in c_fit.items()}
                  if c_fit else {}),
        "verdicts": verdicts,
        "config": config_echo or {},
    }


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
