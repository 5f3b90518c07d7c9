"""Eigensolvers for the assembled Hermitian operators.

Two routes, kept deliberately independent so they can cross-check each
other: a dense path (Householder tridiagonalization followed by implicit
shift QL with eigenvector accumulation, both implemented here) used as the
small-instance oracle, and a matrix-free deflated Lanczos iteration with
full reorthogonalization for the large instances.  Both honor the
spurious-harmonic constraints attached to an operator by restricting to
their orthogonal complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (DENSE_DIM_CAP, SparseHermitianOperator,
                        compressed_basis, to_dense)

__all__ = [
    "EigenRequest",
    "EigenResult",
    "EigensolveError",
    "IndeterminateCountError",
    "householder_tridiagonalize",
    "tridiagonal_ql",
    "dense_spectrum",
    "lanczos_smallest",
    "count_in_window",
]

_EPS = np.finfo(float).eps


class EigensolveError(RuntimeError):
    pass


class IndeterminateCountError(EigensolveError):
    """An eigenvalue sits within tolerance of a counting-window edge."""

    def __init__(self, eigenvalue: float, edge: float, tol: float):
        super().__init__(
            f"eigenvalue {eigenvalue!r} within {tol:g} of window edge "
            f"{edge!r}: count is indeterminate"
        )
        self.eigenvalue = eigenvalue
        self.edge = edge


@dataclass
class EigenRequest:
    operator: SparseHermitianOperator
    count: int
    tol: float = 1e-10
    max_iter: int = 0          # 0: choose from dimension
    seed: int = 1234

    def __post_init__(self):
        if self.count < 1:
            raise EigensolveError(f"count must be >= 1, got {self.count}")
        if not 0 < self.tol <= 1e-2:
            raise EigensolveError(f"tolerance must be in (0, 1e-2], got {self.tol}")


@dataclass
class EigenResult:
    eigenvalues: np.ndarray            # ascending
    residuals: np.ndarray              # ||A v - theta v|| per pair
    iterations: int
    backend: str                       # "lanczos" | "dense"
    vectors: np.ndarray | None = None  # full-space columns, may be None
    converged: bool = True
    labels: np.ndarray | None = None   # per-eigenvector degree, dense route
    warnings: list = field(default_factory=list)


def householder_tridiagonalize(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unitary reduction of a Hermitian matrix to real symmetric tridiagonal
    form: returns (d, e, Q) with A = Q T Q*, T = tridiag(e, d, e)."""
    A = np.array(A, dtype=complex)
    m = A.shape[0]
    Q = np.eye(m, dtype=complex)
    for k in range(m - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha <= _EPS * max(1.0, np.abs(A).max()):
            continue
        phase = x[0] / abs(x[0]) if abs(x[0]) > 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        # trailing block update B <- P B P, P = I - 2 v v*
        B = A[k + 1:, k + 1:]
        p = B @ v
        w = 2.0 * p - 2.0 * np.real(v.conj() @ p) * v
        B -= np.outer(v, w.conj()) + np.outer(w, v.conj())
        new_head = -phase * alpha
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
        A[k + 1, k] = new_head
        A[k, k + 1] = np.conj(new_head)
        Qb = Q[:, k + 1:]
        Qb -= 2.0 * np.outer(Qb @ v, v.conj())
    d = np.real(np.diag(A)).copy()
    sub = np.diag(A, -1).copy()
    # chase subdiagonal phases into Q so that T is real nonnegative
    t = 1.0 + 0.0j
    e = np.empty(max(m - 1, 0))
    for i in range(m - 1):
        Q[:, i] *= t
        a = abs(sub[i])
        e[i] = a
        t = t * (sub[i] / a) if a > 0 else t
    if m:
        Q[:, m - 1] *= t
    return d, e, Q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray,
                   Z: np.ndarray | None = None,
                   max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray | None]:
    """Implicit-shift QL on a real symmetric tridiagonal matrix.

    d: diagonal (m,), e: subdiagonal (m-1,).  If Z (rows x m) is given, the
    accumulated rotations are applied to its columns, so on entry Z = basis
    mapping tridiagonal coordinates to the original space and on exit its
    columns are eigenvectors.  Returns eigenvalues ascending (Z permuted
    accordingly)."""
    d = np.asarray(d, dtype=float).copy()
    m = d.size
    e = np.append(np.asarray(e, dtype=float), 0.0)
    if e.size != m:
        raise EigensolveError(f"subdiagonal length must be {m - 1}")
    for l in range(m):
        for sweep in range(max_sweeps + 1):
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            if sweep == max_sweeps:
                raise EigensolveError(
                    f"QL iteration failed to converge at index {l}"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if Z is not None:
                    zi = Z[:, i].copy()
                    zi1 = Z[:, i + 1].copy()
                    Z[:, i + 1] = s * zi + c * zi1
                    Z[:, i] = c * zi - s * zi1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0
    order = np.argsort(d, kind="stable")
    if Z is not None:
        Z = Z[:, order]
    return d[order], Z


def dense_spectrum(op: SparseHermitianOperator) -> EigenResult:
    """Full spectrum of a (possibly constrained) Hermitian operator through
    the in-repo Householder + QL path; the oracle route."""
    if op.dim > DENSE_DIM_CAP:
        raise EigensolveError(
            f"dimension {op.dim} exceeds the dense cap {DENSE_DIM_CAP}"
        )
    if not op.hermitian:
        raise EigensolveError("dense_spectrum needs a Hermitian operator")
    A = to_dense(op)
    Q_basis, labels = (None, op.degree_labels)
    if op.constraints is not None:
        Q_basis, labels = compressed_basis(op)
        A = Q_basis.conj().T @ A @ Q_basis
    A = 0.5 * (A + A.conj().T)
    d, e, Q = householder_tridiagonalize(A)
    vals, Z = tridiagonal_ql(d, e, Q)
    res = np.linalg.norm(A @ Z - Z * vals, axis=0)
    if labels is not None and Q_basis is None and op.grading == "degree":
        # label eigenvectors by their dominant degree
        labels = _vector_degrees(Z, op.degree_labels)
    elif labels is not None and Q_basis is not None:
        labels = _vector_degrees(Z, labels)
    vectors = Z if Q_basis is None else Q_basis @ Z
    return EigenResult(
        eigenvalues=vals, residuals=res, iterations=op.dim,
        backend="dense", vectors=vectors, labels=labels,
    )


def _vector_degrees(Z: np.ndarray, coord_labels: np.ndarray) -> np.ndarray:
    degs = sorted(set(coord_labels.tolist()))
    weights = np.stack([
        np.linalg.norm(Z[coord_labels == dd], axis=0) for dd in degs
    ])
    return np.array(degs)[np.argmax(weights, axis=0)]


def _orthonormalize_against(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for _ in range(2):     # twice is enough
        for b in basis:
            v = v - b * (b.conj() @ v)
    return v


def lanczos_smallest(request: EigenRequest) -> EigenResult:
    """The `count` smallest eigenvalues by deflated Lanczos with full
    reorthogonalization: converge the smallest Ritz pair, lock it, deflate,
    repeat.  Deterministic for a fixed seed.  Constraint columns of the
    operator are deflated from the start, so spurious harmonics never enter
    the Krylov space."""
    op = request.operator
    if not op.hermitian:
        raise EigensolveError("lanczos_smallest needs a Hermitian operator")
    if op.physical_dim < request.count + 2:
        raise EigensolveError(
            f"need dimension >= count + 2 ({request.count + 2}), operator "
            f"has physical dimension {op.physical_dim}"
        )
    rng = np.random.default_rng(request.seed)
    deflate: list[np.ndarray] = []
    if op.constraints is not None:
        deflate.extend(op.constraints[:, i] for i in range(op.constraints.shape[1]))
    max_iter = request.max_iter or min(op.physical_dim, 400)

    locked_vals: list[float] = []
    locked_vecs: list[np.ndarray] = []
    residuals: list[float] = []
    total_iters = 0
    warnings: list[str] = []
    converged_all = True

    for _pair in range(request.count):
        basis: list[np.ndarray] = []
        alphas: list[float] = []
        betas: list[float] = []
        v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        v = _orthonormalize_against(v, deflate + locked_vecs)
        v /= np.linalg.norm(v)
        pair_done = False
        for it in range(max_iter):
            basis.append(v)
            w = op.matvec(v)
            a = float(np.real(v.conj() @ w))
            alphas.append(a)
            w = w - a * v
            if betas:
                w = w - betas[-1] * basis[-2]
            w = _orthonormalize_against(w, deflate + locked_vecs + basis)
            b = float(np.linalg.norm(w))
            total_iters += 1
            # cheap Ritz check: only the bottom row of the eigenvector
            # matrix of T is needed for the residual estimate
            if it < 20 or it % 10 == 9 or it == max_iter - 1:
                last_row = np.zeros((1, len(alphas)))
                last_row[0, -1] = 1.0
                vals, lr = tridiagonal_ql(
                    np.array(alphas), np.array(betas), last_row)
                scale = max(1.0, abs(vals[-1]))
                rnorm = b * abs(lr[0, 0])
                if rnorm <= request.tol * scale or b <= _EPS * scale * 100:
                    pair_done = True
                    break
            betas.append(b)
            v = w / b
        m = len(alphas)
        vals, Zs = tridiagonal_ql(np.array(alphas), np.array(betas), np.eye(m))
        theta = vals[0]
        y = Zs[:, 0]
        ritz = sum(yc * bv for yc, bv in zip(y, basis))
        ritz = _orthonormalize_against(ritz, deflate + locked_vecs)
        nrm = np.linalg.norm(ritz)
        if nrm < 1e-8:
            raise EigensolveError("Ritz vector collapsed during deflation")
        ritz /= nrm
        resid = float(np.linalg.norm(op.matvec(ritz) - theta * ritz))
        if not pair_done and resid > request.tol * max(1.0, abs(theta)):
            converged_all = False
            warnings.append(
                f"pair {_pair}: not converged after {max_iter} iterations "
                f"(residual {resid:.3e})"
            )
        locked_vals.append(float(theta))
        locked_vecs.append(ritz)
        residuals.append(resid)

    order = np.argsort(locked_vals, kind="stable")
    vals = np.array(locked_vals)[order]
    res = np.array(residuals)[order]
    vecs = np.stack([locked_vecs[i] for i in order], axis=1)
    return EigenResult(
        eigenvalues=vals, residuals=res, iterations=total_iters,
        backend="lanczos", vectors=vecs, converged=converged_all,
        warnings=warnings,
    )


def count_in_window(result_or_op, lo: float, hi: float,
                    edge_tol: float = 1e-9) -> int:
    """Exact count of eigenvalues in the open interval (lo, hi); refuses to
    guess when an eigenvalue sits within edge_tol of either edge."""
    if lo >= hi:
        raise EigensolveError(f"window ({lo}, {hi}) is empty")
    if isinstance(result_or_op, SparseHermitianOperator):
        result = dense_spectrum(result_or_op)
    else:
        result = result_or_op
    vals = np.asarray(result.eigenvalues, dtype=float)
    for edge in (lo, hi):
        bad = np.abs(vals - edge) <= edge_tol
        if bad.any():
            raise IndeterminateCountError(float(vals[bad][0]), edge, edge_tol)
    return int(np.count_nonzero((vals > lo) & (vals < hi)))
