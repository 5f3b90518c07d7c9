"""Experiment runner: parses a line-oriented config, sweeps the requested
tensor powers through the selected verification suites, and writes
report.json plus per-k spectrum CSVs.

Exit codes: 0 all verdicts pass, 1 at least one fails, 2 config error,
3 numerical indeterminacy (unseparated clusters, non-convergence).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from .analysis import AnalysisError
from .clifford import clifford_generators
from .covering import CoveringError, build_quotient_family, gamma_index_check
from .eigensolve import (EigenRequest, EigensolveError, dense_spectrum,
                         lanczos_smallest)
from .gauge import assign_line_bundle
from .geometry import (GeometryError, ModelManifold, ManifoldKind,
                       build_sphere_model, build_torus_model)
from .operators import (DENSE_DIM_CAP, dirac_operator, dirac_square,
                        lichnerowicz_rhs, restrict_parity,
                        schrodinger_operator)

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "run", "main"]

SUITES = ("gap", "schrodinger", "lichnerowicz", "decay", "covering", "all")
FLUX_FINENESS_CAP = 1.0 / 16.0


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "model": {
        "kind": str, "n": int, "sides": "floats", "resolution": int,
        "a": "floats", "radius": float, "flux": int,
    },
    "bundle": {"rank_e": int, "chern_e": "introws"},
    "sweep": {"k_min": int, "k_max": int, "suite": "suites"},
    "solver": {"tolerance": float, "max_iterations": int, "seed": int,
               "count_extra": int},
    "covering": {"scales": "ints"},
    "output": {"directory": str},
}

_DEFAULTS = {
    "model": {"kind": "flat_torus", "n": 1, "sides": (1.0, 1.0),
              "resolution": 16, "a": (1.0,), "radius": 1.0, "flux": 1},
    "bundle": {"rank_e": 1, "chern_e": None},
    "sweep": {"k_min": 1, "k_max": 3, "suite": ("gap",)},
    "solver": {"tolerance": 1e-9, "max_iterations": 400, "seed": 1234,
               "count_extra": 4},
    "covering": {"scales": (1, 2)},
    "output": {"directory": "out"},
}


class ExperimentConfig(dict):
    """Validated, fully-defaulted configuration (nested dict by section)."""


def _convert(section: str, key: str, raw: str, line_no: int):
    kind = _SCHEMA[section][key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == "floats":
            return tuple(float(x) for x in raw.split(","))
        if kind == "ints":
            return tuple(int(x) for x in raw.split(","))
        if kind == "introws":
            return tuple(tuple(int(x) for x in row.split(","))
                         for row in raw.split(";"))
        if kind == "suites":
            suites = tuple(s.strip() for s in raw.split(","))
            for s in suites:
                if s not in SUITES:
                    raise ValueError(f"unknown suite {s!r}")
            return suites
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: bad value for {section}.{key}: "
                          f"{exc}") from exc
    raise ConfigError(f"internal schema error for {section}.{key}")


def parse_config(text: str) -> ExperimentConfig:
    cfg = {sec: dict(vals) for sec, vals in _DEFAULTS.items()}
    section = None
    seen: set[tuple[str, str]] = set()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {line_no}: unknown section "
                                  f"[{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got "
                              f"{line!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside any [section]")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {line_no}: unknown key {key!r} in "
                              f"[{section}]")
        if (section, key) in seen:
            raise ConfigError(f"line {line_no}: duplicate key "
                              f"{section}.{key}")
        seen.add((section, key))
        cfg[section][key] = _convert(section, key, value, line_no)
    return _validate(ExperimentConfig(cfg))


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    sweep = cfg["sweep"]
    if sweep["k_min"] > sweep["k_max"] or sweep["k_min"] < 0:
        raise ConfigError(
            f"empty or invalid k-range [{sweep['k_min']}, {sweep['k_max']}]"
        )
    model = cfg["model"]
    if model["kind"] not in ("flat_torus", "round_sphere"):
        raise ConfigError(f"unknown model kind {model['kind']!r}")
    bundle = cfg["bundle"]
    n = model["n"]
    if bundle["chern_e"] is None:
        bundle["chern_e"] = tuple((0,) * n for _ in range(bundle["rank_e"]))
    if len(bundle["chern_e"]) != bundle["rank_e"]:
        raise ConfigError("chern_e must have one row per E component")
    if any(len(row) != n for row in bundle["chern_e"]):
        raise ConfigError(f"each chern_e row needs {n} entries")
    if model["kind"] == "flat_torus":
        try:
            built = build_torus_model(n, model["sides"],
                                      model["resolution"], model["a"])
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc
        fineness = sweep["k_max"] * max(built.chern) / model["resolution"] ** 2
        if fineness > FLUX_FINENESS_CAP:
            raise ConfigError(
                f"k_max violates the flux-fineness cap: k*chern/N^2 = "
                f"{fineness:.4f} > {FLUX_FINENESS_CAP}"
            )
    return cfg


def _build_model(cfg: ExperimentConfig) -> ModelManifold:
    m = cfg["model"]
    if m["kind"] == "flat_torus":
        return build_torus_model(m["n"], m["sides"], m["resolution"], m["a"])
    return build_sphere_model(m["radius"], m["flux"])


DENSE_PREFERRED_DIM = 1024


def _low_spectrum(op, want: int, tol: float, max_iter: int, seed: int):
    if op.dim <= DENSE_PREFERRED_DIM or (want >= op.physical_dim - 2
                                         and op.dim <= DENSE_DIM_CAP):
        res = dense_spectrum(op)
    else:
        res = lanczos_smallest(EigenRequest(op, count=want, tol=tol,
                                            max_iter=max_iter, seed=seed))
        if not res.converged:
            raise EigensolveError("; ".join(res.warnings))
    return res


def _gauge_for(model, k, cfg):
    b = cfg["bundle"]
    return assign_line_bundle(model, k, rank_E=b["rank_e"],
                              chern_E=b["chern_e"])


def _suite_gap(model, cfg, ks, outdir):
    alg = clifford_generators(model.n)
    sol = cfg["solver"]
    spectra, odd_minima, predictions = {}, {}, {}
    vectors_by_k = {}
    labels = None
    for k in ks:
        gauge = _gauge_for(model, k, cfg)
        pred = analysis.index_prediction(model, gauge, k)
        predictions[k] = pred.d_k
        D = dirac_operator(model, gauge, alg)
        sq = dirac_square(D)
        labels = sq.degree_labels
        want = pred.d_k + sol["count_extra"]
        res = _low_spectrum(sq, want, sol["tolerance"],
                            sol["max_iterations"], sol["seed"] + k)
        spectra[k] = res.eigenvalues
        if res.vectors is not None:
            thr = analysis.kernel_threshold(k, model.lam)
            mask = np.abs(res.eigenvalues) < thr
            if mask.any():
                vectors_by_k[k] = res.vectors[:, mask]
        odd = restrict_parity(sq, "odd")
        odd_res = _low_spectrum(odd, 1, sol["tolerance"],
                                sol["max_iterations"], sol["seed"] + 1000 + k)
        odd_minima[k] = float(odd_res.eigenvalues[0])
        degs = getattr(res, "labels", None)
        rows = analysis.spectrum_csv_rows(k, res.eigenvalues, degs)
        with open(os.path.join(outdir, f"spectrum_k{k}.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
    reports, ok, details = analysis.verify_gap(spectra, odd_minima, model,
                                               predictions)
    c_fit = {r.k: r.c_fit for r in reports}
    kernel_dims = {r.k: r.kernel_dim for r in reports}
    payload = {
        "ok": ok, "details": details,
        "per_k": [{"k": r.k, "kernel_dim": r.kernel_dim,
                   "smallest_nonzero": r.smallest_nonzero,
                   "c_fit": r.c_fit, "odd_min": r.odd_min} for r in reports],
    }
    return ok, payload, spectra, kernel_dims, predictions, c_fit, \
        (vectors_by_k, labels)


def _suite_schrodinger(model, cfg, ks):
    sol = cfg["solver"]
    spectra, predictions = {}, {}
    for k in ks:
        gauge = _gauge_for(model, k, cfg)
        pred = analysis.index_prediction(model, gauge, k)
        predictions[k] = pred.d_k
        op = schrodinger_operator(model, gauge)
        want = pred.d_k + sol["count_extra"]
        res = _low_spectrum(op, want, sol["tolerance"],
                            sol["max_iterations"], sol["seed"] + 2000 + k)
        spectra[k] = res.eigenvalues
    verdict = analysis.verify_schrodinger(spectra, model, predictions)
    payload = {"ok": verdict.ok, "a": verdict.a, "b": verdict.b,
               "counts": {str(k): v for k, v in verdict.counts.items()},
               "reasons": verdict.reasons}
    return verdict.ok, payload, spectra, verdict.counts, predictions


def _suite_lichnerowicz(model, cfg, ks):
    alg = clifford_generators(model.n)
    rng = np.random.default_rng(cfg["solver"]["seed"])
    worst = 0.0
    for k in ks:
        gauge = _gauge_for(model, k, cfg)
        D = dirac_operator(model, gauge, alg)
        sq = dirac_square(D)
        rhs = lichnerowicz_rhs(model, gauge, alg)
        for _ in range(100):
            v = rng.standard_normal(sq.dim) + 1j * rng.standard_normal(sq.dim)
            nv = np.linalg.norm(v)
            r = np.linalg.norm(sq.matvec(v) - rhs.matvec(v)) / nv
            worst = max(worst, float(r))
    ok = worst <= 1e-10
    return ok, {"ok": ok, "max_residual": worst, "threshold": 1e-10}


def _suite_decay(model, cfg, ks, gap_artifacts):
    vectors_by_k, labels = gap_artifacts
    if not vectors_by_k:
        raise AnalysisError("decay suite needs kernel vectors; run the gap "
                            "suite with the dense or vector-producing solver")
    report = analysis.kernel_component_decay(vectors_by_k, labels)
    payload = {"ok": report.ok,
               "rho": {str(k): v for k, v in report.rho.items()},
               "max_rho_sqrt_k": report.max_rho_sqrt_k,
               "slope": report.slope, "reasons": report.reasons}
    return report.ok, payload


def _suite_covering(model, cfg, ks):
    scales = cfg["covering"]["scales"]
    results = {}
    ok = True
    for k in ks:
        if k < 1:
            continue
        gauge = _gauge_for(model, k, cfg)
        family = build_quotient_family(model, gauge, scales)
        verdict = gamma_index_check(family)
        results[str(k)] = {
            "ok": verdict.ok,
            "per_scale_kernel": {str(m): v for m, v
                                 in verdict.per_scale_kernel.items()},
            "per_scale_odd_min": {str(m): v for m, v
                                  in verdict.per_scale_odd_min.items()},
            "base_index": verdict.base_index,
            "reasons": verdict.reasons,
        }
        ok = ok and verdict.ok
    return ok, {"ok": ok, "per_k": results}


def _run_sphere(cfg, model, ks, outdir):
    b = cfg["bundle"]
    rows = analysis.sphere_report(model, ks, rank_E=b["rank_e"],
                                  chern_E=b["chern_e"])
    ok = all(r["d_k_observed"] == r["d_k_predicted"] and
             abs(r["lowest_cluster"]) < 1e-12 and
             r["gap_location"] > 0 for r in rows)
    verdicts = {"sphere": {"ok": ok, "per_k": rows}}
    eigenvalues = {}
    d_obs, d_pred = {}, {}
    for k, r in zip(ks, rows):
        oracle = analysis.sphere_oracle(model, k)
        vals = np.repeat(oracle.shifted, oracle.multiplicities)
        eigenvalues[k] = vals
        d_obs[k] = r["d_k_observed"]
        d_pred[k] = r["d_k_predicted"]
        csv = analysis.spectrum_csv_rows(k, vals)
        with open(os.path.join(outdir, f"spectrum_k{k}.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(csv) + "\n")
    report = analysis.make_report(model, ks, eigenvalues, d_obs, d_pred,
                                  None, verdicts, config_echo=dict(cfg))
    analysis.write_report(report, os.path.join(outdir, "report.json"))
    return 0 if ok else 1


def run(cfg: ExperimentConfig, outdir: str | None = None) -> int:
    outdir = outdir or cfg["output"]["directory"]
    os.makedirs(outdir, exist_ok=True)
    model = _build_model(cfg)
    sweep = cfg["sweep"]
    ks = list(range(max(sweep["k_min"], 1), sweep["k_max"] + 1))
    if not ks:
        raise ConfigError("k-range contains no k >= 1")
    suites = sweep["suite"]
    if "all" in suites:
        suites = ("gap", "schrodinger", "lichnerowicz", "decay", "covering")

    if model.kind is ManifoldKind.ROUND_SPHERE:
        return _run_sphere(cfg, model, ks, outdir)

    verdicts: dict = {}
    eigenvalues_by_k: dict = {}
    d_obs: dict = {}
    d_pred: dict = {}
    c_fit: dict = {}
    gap_artifacts = ({}, None)
    all_ok = True

    try:
        if "gap" in suites or "decay" in suites:
            ok, payload, spectra, kdims, preds, cfit, gap_artifacts = \
                _suite_gap(model, cfg, ks, outdir)
            verdicts["gap"] = payload
            eigenvalues_by_k.update(spectra)
            d_obs.update(kdims)
            d_pred.update(preds)
            c_fit.update(cfit)
            if "gap" in suites:
                all_ok = all_ok and ok
        if "schrodinger" in suites:
            ok, payload, spectra, counts, preds = \
                _suite_schrodinger(model, cfg, ks)
            verdicts["schrodinger"] = payload
            for k in spectra:
                eigenvalues_by_k.setdefault(k, spectra[k])
            d_obs.update(counts)
            d_pred.update(preds)
            all_ok = all_ok and ok
        if "lichnerowicz" in suites:
            ok, payload = _suite_lichnerowicz(model, cfg, ks)
            verdicts["lichnerowicz"] = payload
            all_ok = all_ok and ok
        if "decay" in suites:
            ok, payload = _suite_decay(model, cfg, ks, gap_artifacts)
            verdicts["decay"] = payload
            all_ok = all_ok and ok
        if "covering" in suites:
            ok, payload = _suite_covering(model, cfg, ks)
            verdicts["covering"] = payload
            all_ok = all_ok and ok
    except (AnalysisError, EigensolveError, CoveringError) as exc:
        verdicts["indeterminate"] = {"error": str(exc)}
        report = analysis.make_report(model, ks, eigenvalues_by_k, d_obs,
                                      d_pred, c_fit, verdicts,
                                      config_echo=dict(cfg))
        analysis.write_report(report, os.path.join(outdir, "report.json"))
        return 3

    report = analysis.make_report(model, ks, eigenvalues_by_k, d_obs, d_pred,
                                  c_fit, verdicts, config_echo=dict(cfg))
    analysis.write_report(report, os.path.join(outdir, "report.json"))
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="diracgap",
        description="spectral-gap verification sweeps for magnetic Dirac "
                    "and Schrodinger operators on model manifolds",
    )
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="advisory thread count (matvecs are "
                             "single-threaded; accepted for interface "
                             "stability)")
    parser.add_argument("--strict-float", action="store_true",
                        help="force sequential reductions (already the "
                             "default execution mode; recorded in the "
                             "report)")
    parser.add_argument("--suite", default=None,
                        help="override the suite selection from the config")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if args.suite is not None:
            suites = tuple(s.strip() for s in args.suite.split(","))
            for s in suites:
                if s not in SUITES:
                    raise ConfigError(f"unknown suite {s!r}")
            cfg["sweep"]["suite"] = suites
        cfg["output"]["strict_float"] = bool(args.strict_float)
        cfg["output"]["threads"] = args.threads
    except (ConfigError, GeometryError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, outdir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
