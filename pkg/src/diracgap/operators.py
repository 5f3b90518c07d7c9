"""Assembly of the lattice operators: covariant Laplacian, shifted
Schrodinger operator, the Dirac operator built from the gauged
forward-difference Wirtinger derivatives, its square, and the curvature
(Weitzenbock-type) right-hand side built from the very same stencils.

State layout: flat vectors index (fiber monomial, E component, lattice site)
in C order; the lattice axes follow the gauge module convention (axis 2j is
x of plane j, axis 2j+1 is y).

Discretization: per plane j the antiholomorphic derivative is the gauged
forward difference
    delta_j = (grad_y - i grad_x) / sqrt(2),   grad_mu = (F_mu - 1)/h_mu,
with F_mu the magnetic shift.  The Dirac operator is
    D = sqrt(2) * sum_j ( wbar^j ^  (x) delta_j  +  i_{wbar_j} (x) delta_j* ).
Because shifts in distinct planes commute and wedge/contraction satisfy the
canonical anticommutation relations, D^2 equals

    Delta (x) Id  -  sum_j S_j (x) Id  +  2 sum_j [delta_j, delta_j*] (x) N_j

EXACTLY as matrices, where Delta is the 2n-point-stencil Laplacian,
S_j = Delta_j - 2 delta_j* delta_j, and N_j the fiber number operator.  On
smooth low modes S_j and [delta_j, delta_j*] both reduce to the magnetic
field 2 pi k a_j of plane j, so the three terms are the stencil realizations
of the continuum curvature terms -k tau and -2k omega_d (the auxiliary-twist
contributions, i.e. the c(R) endomorphism of the direct-sum bundle, are
carried automatically because each E component differentiates with its own
combined flux).  The assembler for the right-hand side uses these stencil
forms, which is what makes the identity exact instead of O(h^2).

Square discrete derivative operators force dim ker delta = dim ker delta*,
so the raw D acquires spurious zero modes whenever a plane carries positive
flux (the lattice-doubling ghost in this calculus); flux-free planes admit
one extra momentum doubler per side when the resolution is a multiple of 4.
The spurious modes are computed exactly per plane and the physical operator
is the compression to their orthogonal complement, on which D^2 keeps the
exact identity and the kernel matches the continuum count in every degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clifford import FiberAlgebra
from .gauge import GaugeField
from .geometry import ManifoldKind, ModelManifold

__all__ = [
    "SparseHermitianOperator",
    "OperatorError",
    "covariant_laplacian",
    "schrodinger_operator",
    "dirac_operator",
    "dirac_square",
    "lichnerowicz_rhs",
    "restrict_parity",
    "to_dense",
    "compressed_basis",
    "export_matrix_market",
]

DENSE_DIM_CAP = 4096
KERNEL_SEPARATION = 1e3


class OperatorError(ValueError):
    pass


@dataclass
class SparseHermitianOperator:
    """Matrix-free Hermitian (unless flagged) operator with grading tags.

    constraints, when present, is an orthonormal set of columns spanning the
    spurious-harmonic subspace; the physical operator is the compression to
    its orthogonal complement.  Every assembled operator maps that
    complement to itself.
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    hermitian: bool = True
    grading: str = "none"                 # "none" | "degree"
    degree_labels: np.ndarray | None = None
    parity_swap: bool = False             # True for D (interchanges parities)
    constraints: np.ndarray | None = None # dim x m orthonormal columns
    meta: dict = field(default_factory=dict)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matvec(np.asarray(v, dtype=complex).reshape(self.dim))

    @property
    def physical_dim(self) -> int:
        m = 0 if self.constraints is None else self.constraints.shape[1]
        return self.dim - m

    def project_out_constraints(self, v: np.ndarray) -> np.ndarray:
        if self.constraints is None:
            return v
        H = self.constraints
        return v - H @ (H.conj().T @ v)


class _LatticeCalc:
    """Shared roll-based magnetic calculus over (fiber, rank_E, lattice)."""

    def __init__(self, model: ModelManifold, gauge: GaugeField):
        if model.kind is not ManifoldKind.FLAT_TORUS:
            raise OperatorError(
                "lattice assembly needs a torus model; the sphere is served "
                "by the analytic backend in the analysis module"
            )
        if gauge.n != model.n or gauge.resolution != model.resolution:
            raise OperatorError("gauge field does not match the model lattice")
        self.model = model
        self.gauge = gauge
        self.n = model.n
        self.h = np.array([model.spacing(mu) for mu in range(2 * model.n)])

    def _ax(self, arr: np.ndarray, mu: int) -> int:
        return arr.ndim - 2 * self.n + mu

    def grad(self, arr: np.ndarray, mu: int) -> np.ndarray:
        U = self.gauge.links[:, mu]
        return (np.roll(arr, -1, axis=self._ax(arr, mu)) * U - arr) / self.h[mu]

    def grad_dag(self, arr: np.ndarray, mu: int) -> np.ndarray:
        U = self.gauge.links[:, mu]
        return (np.roll(arr * U.conj(), 1, axis=self._ax(arr, mu)) - arr) / self.h[mu]

    def delta(self, arr: np.ndarray, j: int) -> np.ndarray:
        return (self.grad(arr, 2 * j + 1) - 1j * self.grad(arr, 2 * j)) / np.sqrt(2)

    def delta_dag(self, arr: np.ndarray, j: int) -> np.ndarray:
        return (self.grad_dag(arr, 2 * j + 1) + 1j * self.grad_dag(arr, 2 * j)) / np.sqrt(2)

    def laplacian(self, arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        for mu in range(2 * self.n):
            U = self.gauge.links[:, mu]
            ax = self._ax(arr, mu)
            fwd = np.roll(arr, -1, axis=ax) * U
            bwd = np.roll(arr * U.conj(), 1, axis=ax)
            out += (2 * arr - fwd - bwd) / self.h[mu] ** 2
        return out

    def plane_laplacian(self, arr: np.ndarray, j: int) -> np.ndarray:
        out = np.zeros_like(arr)
        for mu in (2 * j, 2 * j + 1):
            U = self.gauge.links[:, mu]
            ax = self._ax(arr, mu)
            fwd = np.roll(arr, -1, axis=ax) * U
            bwd = np.roll(arr * U.conj(), 1, axis=ax)
            out += (2 * arr - fwd - bwd) / self.h[mu] ** 2
        return out

    def curvature_commutator(self, arr: np.ndarray, j: int) -> np.ndarray:
        """[delta_j, delta_j*]; reduces to the plane-j magnetic field on
        smooth modes but is applied as the exact stencil commutator."""
        return (self.delta(self.delta_dag(arr, j), j)
                - self.delta_dag(self.delta(arr, j), j))


def covariant_laplacian(model: ModelManifold, gauge: GaugeField) -> SparseHermitianOperator:
    """Gauged 2n-point-stencil Laplacian on sections of L^k (x) E."""
    calc = _LatticeCalc(model, gauge)
    shape = (1, gauge.rank_E) + gauge.lattice_shape
    dim = gauge.rank_E * model.num_sites

    def matvec(flat: np.ndarray) -> np.ndarray:
        return calc.laplacian(flat.reshape(shape)).reshape(dim)

    return SparseHermitianOperator(
        dim=dim, matvec=matvec,
        meta={"name": "laplacian", "model": model, "gauge": gauge},
    )


def schrodinger_operator(model: ModelManifold, gauge: GaugeField) -> SparseHermitianOperator:
    """Delta_k - k*tau, the curvature-shifted Laplacian."""
    lap = covariant_laplacian(model, gauge)
    shift = gauge.k * model.tau

    def matvec(flat: np.ndarray) -> np.ndarray:
        return lap.matvec(flat) - shift * flat

    return SparseHermitianOperator(
        dim=lap.dim, matvec=matvec,
        meta={"name": "schrodinger", "model": model, "gauge": gauge,
              "shift": shift},
    )


def _fiber_index_maps(algebra: FiberAlgebra):
    """(rows, cols, signs) per plane for wedge and contraction matrices."""
    wmaps, cmaps = [], []
    for j in range(algebra.n):
        for mat, acc in ((algebra.wedge[j], wmaps),
                         (algebra.contraction[j], cmaps)):
            rows, cols = np.nonzero(mat)
            acc.append((rows, cols, mat[rows, cols].reshape(-1, 1, *(1,) * (2 * algebra.n))))
    return wmaps, cmaps


def _plane_links_2d(gauge: GaugeField, comp: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Restrict the plane-j link fields to a 2d (x, y) slice; they depend
    only on the plane's own coordinates, so any slice of the other axes works."""
    idx: list = [0] * (2 * gauge.n)
    idx[2 * j] = slice(None)
    idx[2 * j + 1] = slice(None)
    ux = gauge.links[comp, 2 * j][tuple(idx)]
    uy = gauge.links[comp, 2 * j + 1][tuple(idx)]
    return ux, uy


def _plane_delta_matrix(model: ModelManifold, gauge: GaugeField,
                        comp: int, j: int) -> np.ndarray:
    """Dense N^2 x N^2 matrix of delta_j on the plane-j lattice alone."""
    N = model.resolution
    hx, hy = model.spacing(2 * j), model.spacing(2 * j + 1)
    ux, uy = _plane_links_2d(gauge, comp, j)
    eye = np.eye(N * N, dtype=complex).reshape(N, N, N * N)
    gy = (np.roll(eye, -1, axis=1) * uy[:, :, None] - eye) / hy
    gx = (np.roll(eye, -1, axis=0) * ux[:, :, None] - eye) / hx
    return ((gy - 1j * gx) / np.sqrt(2)).reshape(N * N, N * N)


def _plane_kernels(model: ModelManifold, gauge: GaugeField, comp: int, j: int):
    """Kernel bases of delta_j and delta_j* on the plane-j lattice for one
    E component, split into genuine (continuum-counterpart) and spurious
    parts, with a hard separation guard.

    F > 0: ker delta has dimension F (the lowest-level states, all genuine);
    discrete index symmetry forces dim ker delta* = F too, and that whole
    adjoint kernel is spurious.  F = 0 (trivial plane links): the constant
    spans the genuine kernel on both sides; when the resolution is a
    multiple of 4 the free stencil admits one extra momentum doubler per
    side, which is spurious.
    """
    F = gauge.k * gauge.chern[j] + gauge.chern_E[comp][j]
    if F < 0:
        raise OperatorError(
            f"negative combined flux {F} in plane {j + 1} is unsupported"
        )
    M = _plane_delta_matrix(model, gauge, comp, j)
    # M = U S V*: the trailing columns of V span ker delta, those of U span
    # ker delta* (the same singular values by the square-matrix symmetry)
    u, s, vh = np.linalg.svd(M)
    if F > 0:
        m_ker = F
    else:
        m_ker = max(1, int(np.count_nonzero(s < 1e-10 * s[0])))
    lo, hi = s[-m_ker], s[-m_ker - 1]
    if lo * KERNEL_SEPARATION > hi:
        raise OperatorError(
            f"plane {j + 1} component {comp}: kernel of delta not separated "
            f"(sigma_{m_ker}={hi:.3e}, sigma_kernel={lo:.3e}); refine the "
            "lattice"
        )
    out = {}
    for tag, vecs in (("fwd", vh.conj().T), ("dag", u)):
        B = vecs[:, -m_ker:]
        if F > 0:
            genuine = B if tag == "fwd" else B[:, :0]
            spurious = B[:, :0] if tag == "fwd" else B
        else:
            # rotate the kernel basis so its first column is the constant
            # (an exact kernel vector of both sides for trivial links)
            const = np.full(B.shape[0], B.shape[0] ** -0.5, dtype=complex)
            coeff = B.conj().T @ const
            W, _ = np.linalg.qr(np.concatenate(
                [coeff[:, None], np.eye(m_ker, dtype=complex)], axis=1))
            B = B @ W[:, :m_ker]
            genuine, spurious = B[:, :1], B[:, 1:]
        out[tag] = (genuine, spurious)
    return F, out["fwd"], out["dag"]


def _kron_columns(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _spurious_harmonics(model: ModelManifold, gauge: GaugeField,
                        algebra: FiberAlgebra) -> np.ndarray | None:
    """Orthonormal columns spanning the lattice-harmonic spaces with no
    continuum counterpart: every tensor product over planes (adjoint-side
    kernels on planes in the fiber monomial, forward kernels elsewhere)
    containing at least one spurious factor.  Shape:
    (fiber * rank_E * sites, m)."""
    from itertools import product as _iproduct

    n = model.n
    sites = model.num_sites
    fiber = algebra.dim_fiber
    cols: list[np.ndarray] = []
    for comp in range(gauge.rank_E):
        plane = [
            _plane_kernels(model, gauge, comp, j) for j in range(n)
        ]
        for fidx, S in enumerate(algebra.basis):
            # per-plane factor bases for this monomial, split genuine/spurious
            gen, spu = [], []
            for j in range(n):
                _, fwd, dag = plane[j]
                g, x = dag if (j + 1) in S else fwd
                gen.append(g)
                spu.append(x)
            if not any(x.shape[1] for x in spu):
                continue  # purely genuine harmonics, keep them
            for pattern in _iproduct((0, 1), repeat=n):
                if not any(pattern):
                    continue
                mats = [spu[j] if pattern[j] else gen[j] for j in range(n)]
                if any(m.shape[1] == 0 for m in mats):
                    continue
                B = _kron_columns(mats)    # sites x prod(dims)
                block = np.zeros((fiber, gauge.rank_E, sites, B.shape[1]),
                                 dtype=complex)
                block[fidx, comp] = B
                cols.append(block.reshape(fiber * gauge.rank_E * sites, -1))
    if not cols:
        return None
    return np.concatenate(cols, axis=1)


def dirac_operator(model: ModelManifold, gauge: GaugeField,
                   algebra: FiberAlgebra) -> SparseHermitianOperator:
    """D = sqrt(2) (dbar + dbar*) on the monomial fiber basis; Hermitian,
    interchanges even and odd form degrees.  The attached constraints span
    the spurious positive-degree harmonic sector (see module docstring)."""
    if algebra.n != model.n:
        raise OperatorError(
            f"fiber algebra half-dimension {algebra.n} != model {model.n}"
        )
    calc = _LatticeCalc(model, gauge)
    fiber = algebra.dim_fiber
    shape = (fiber, gauge.rank_E) + gauge.lattice_shape
    dim = fiber * gauge.rank_E * model.num_sites
    wmaps, cmaps = _fiber_index_maps(algebra)
    root2 = np.sqrt(2)

    def matvec(flat: np.ndarray) -> np.ndarray:
        psi = flat.reshape(shape)
        out = np.zeros_like(psi)
        for j in range(algebra.n):
            wr, wc, ws = wmaps[j]
            out[wr] += root2 * ws * calc.delta(psi[wc], j)
            cr, cc, cs = cmaps[j]
            out[cr] += root2 * cs * calc.delta_dag(psi[cc], j)
        return out.reshape(dim)

    labels = np.repeat(algebra.degree_grading,
                       gauge.rank_E * model.num_sites)
    H = _spurious_harmonics(model, gauge, algebra)
    return SparseHermitianOperator(
        dim=dim, matvec=matvec, grading="degree", degree_labels=labels,
        parity_swap=True, constraints=H,
        meta={"name": "dirac", "model": model, "gauge": gauge,
              "algebra": algebra, "preserves_degree": False},
    )


def dirac_square(dirac: SparseHermitianOperator) -> SparseHermitianOperator:
    """D^2 via two applications of D; degree preserving."""
    if dirac.meta.get("name") != "dirac":
        raise OperatorError("dirac_square expects the assembled Dirac operator")
    mv = dirac.matvec

    def matvec(flat: np.ndarray) -> np.ndarray:
        return mv(mv(flat))

    return SparseHermitianOperator(
        dim=dirac.dim, matvec=matvec, grading="degree",
        degree_labels=dirac.degree_labels, constraints=dirac.constraints,
        meta={**dirac.meta, "name": "dirac_square", "preserves_degree": True},
    )


def lichnerowicz_rhs(model: ModelManifold, gauge: GaugeField,
                     algebra: FiberAlgebra) -> SparseHermitianOperator:
    """Spinor Laplacian plus the zero-order curvature terms, each realized
    by the same difference stencils as D (see module docstring): the scalar
    term -k tau (+ auxiliary curvature trace) as -sum_j S_j and the fiber
    term -2k omega_d as 2 sum_j [delta_j, delta_j*] (x) N_j, plus K/4 and
    any residual curvature endomorphism (both zero on the flat torus)."""
    if algebra.n != model.n:
        raise OperatorError(
            f"fiber algebra half-dimension {algebra.n} != model {model.n}"
        )
    calc = _LatticeCalc(model, gauge)
    fiber = algebra.dim_fiber
    shape = (fiber, gauge.rank_E) + gauge.lattice_shape
    dim = fiber * gauge.rank_E * model.num_sites
    # fiber rows on which the number operator N_j is 1
    nrows = [np.nonzero(algebra.number_ops[j] > 0.5)[0]
             for j in range(algebra.n)]
    quarter_K = model.scalar_curvature / 4.0

    def matvec(flat: np.ndarray) -> np.ndarray:
        psi = flat.reshape(shape)
        out = calc.laplacian(psi)
        for j in range(algebra.n):
            # -S_j = 2 delta_j* delta_j - Delta_j: scalar curvature shift
            out += 2 * calc.delta_dag(calc.delta(psi, j), j)
            out -= calc.plane_laplacian(psi, j)
            r = nrows[j]
            if r.size:
                out[r] += 2 * calc.curvature_commutator(psi[r], j)
        if quarter_K:
            out += quarter_K * psi
        return out.reshape(dim)

    labels = np.repeat(algebra.degree_grading,
                       gauge.rank_E * model.num_sites)
    return SparseHermitianOperator(
        dim=dim, matvec=matvec, grading="degree", degree_labels=labels,
        meta={"name": "lichnerowicz_rhs", "model": model, "gauge": gauge,
              "algebra": algebra, "preserves_degree": True},
    )


def restrict_parity(op: SparseHermitianOperator, parity: str) -> SparseHermitianOperator:
    """Compression to the even or odd form-degree subspace.

    For degree-preserving operators (D^2, the curvature RHS) this is a
    square Hermitian block; for the parity-swapping D it is the rectangular
    block mapping the chosen parity into the other one."""
    if op.grading != "degree" or op.degree_labels is None:
        raise OperatorError("parity restriction needs a degree-graded operator")
    if parity not in ("even", "odd"):
        raise OperatorError(f"parity must be 'even' or 'odd', got {parity!r}")
    want = 0 if parity == "even" else 1
    mask = (op.degree_labels % 2) == want
    idx = np.nonzero(mask)[0]
    sub_dim = idx.size
    full_mv = op.matvec

    if op.parity_swap:
        out_idx = np.nonzero(~mask)[0]

        def rect_matvec(flat: np.ndarray) -> np.ndarray:
            full = np.zeros(op.dim, dtype=complex)
            full[idx] = flat
            return full_mv(full)[out_idx]

        return SparseHermitianOperator(
            dim=sub_dim, matvec=rect_matvec, hermitian=False,
            meta={**op.meta, "name": op.meta.get("name", "") + f"_{parity}",
                  "rectangular_rows": out_idx.size},
        )

    def matvec(flat: np.ndarray) -> np.ndarray:
        full = np.zeros(op.dim, dtype=complex)
        full[idx] = flat
        return full_mv(full)[idx]

    constraints = None
    if op.constraints is not None:
        keep = []
        for c in range(op.constraints.shape[1]):
            col = op.constraints[:, c]
            w = np.linalg.norm(col[idx])
            if w > 0.5:   # harmonic columns are degree-pure: norm is 0 or 1
                keep.append(col[idx])
        if keep:
            constraints = np.stack(keep, axis=1)
    return SparseHermitianOperator(
        dim=sub_dim, matvec=matvec, grading="degree",
        degree_labels=op.degree_labels[idx], constraints=constraints,
        meta={**op.meta, "name": op.meta.get("name", "") + f"_{parity}",
              "preserves_degree": True},
    )


def to_dense(op: SparseHermitianOperator) -> np.ndarray:
    if op.dim > DENSE_DIM_CAP:
        raise OperatorError(
            f"dimension {op.dim} exceeds the dense cap {DENSE_DIM_CAP}"
        )
    A = np.empty((op.dim, op.dim), dtype=complex)
    e = np.zeros(op.dim, dtype=complex)
    for i in range(op.dim):
        e[i] = 1.0
        A[:, i] = op.matvec(e)
        e[i] = 0.0
    return A


def compressed_basis(op: SparseHermitianOperator) -> tuple[np.ndarray, np.ndarray | None]:
    """Orthonormal basis Q of the physical subspace (complement of the
    constraints), built per degree block so every column keeps a pure
    degree; returns (Q, per-column degree labels or None)."""
    if op.constraints is None:
        Q = np.eye(op.dim, dtype=complex)
        return Q, op.degree_labels
    if op.degree_labels is None:
        H = op.constraints
        Qfull, _ = np.linalg.qr(H, mode="complete")
        return Qfull[:, H.shape[1]:], None
    cols: list[np.ndarray] = []
    labels: list[int] = []
    H = op.constraints
    for d in sorted(set(op.degree_labels.tolist())):
        idx = np.nonzero(op.degree_labels == d)[0]
        norms = np.linalg.norm(H[idx], axis=0)
        block_cols = np.nonzero(norms > 0.5)[0]
        if block_cols.size:
            Hd = H[np.ix_(idx, block_cols)]
            Qfull, _ = np.linalg.qr(Hd, mode="complete")
            comp = Qfull[:, Hd.shape[1]:]
        else:
            comp = np.eye(idx.size, dtype=complex)
        emb = np.zeros((op.dim, comp.shape[1]), dtype=complex)
        emb[idx] = comp
        cols.append(emb)
        labels.extend([d] * comp.shape[1])
    return np.concatenate(cols, axis=1), np.array(labels)


def export_matrix_market(op: SparseHermitianOperator, path: str,
                         drop_tol: float = 0.0) -> None:
    """Coordinate-format MatrixMarket dump (1-based indices) for external
    cross-checks; dense-cap sized operators only."""
    A = to_dense(op)
    rows, cols = np.nonzero(np.abs(A) > drop_tol)
    lines = [
        "%%MatrixMarket matrix coordinate complex general",
        f"{op.dim} {op.dim} {rows.size}",
    ]
    for r, c in zip(rows, cols):
        z = A[r, c]
        lines.append(f"{r + 1} {c + 1} {z.real:.17g} {z.imag:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
