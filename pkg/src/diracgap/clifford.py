"""Fiber algebra of antiholomorphic forms: wedge/contraction operators,
Clifford generators, the degree grading, and the curvature endomorphisms
acting on the 2^n-dimensional fiber.

Basis convention: monomials wbar^{j_1} ^ ... ^ wbar^{j_q} indexed by subsets
S of {1..n}, ordered by (degree, lexicographic tuple).  All downstream
operators inherit this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "FiberAlgebra",
    "CliffordError",
    "clifford_generators",
    "omega_d_matrix",
    "cr_endomorphism",
]


class CliffordError(ValueError):
    pass


@dataclass(frozen=True)
class FiberAlgebra:
    n: int
    dim_fiber: int
    basis: tuple[tuple[int, ...], ...]       # subsets as sorted tuples, 1-based
    degree_grading: np.ndarray               # degree q per basis index
    generators: np.ndarray                   # (2n, 2^n, 2^n) complex, c(e_i)
    wedge: np.ndarray                        # (n, 2^n, 2^n): wbar^j ^
    contraction: np.ndarray                  # (n, 2^n, 2^n): i_{wbar_j}
    number_ops: np.ndarray                   # (n, 2^n) diagonal of wbar^j ^ i_{wbar_j}

    @property
    def parity(self) -> np.ndarray:
        """+1 on even-degree basis elements, -1 on odd."""
        return np.where(self.degree_grading % 2 == 0, 1, -1)


def _basis_subsets(n: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for q in range(n + 1):
        out.extend(combinations(range(1, n + 1), q))
    return out


def clifford_generators(n: int) -> FiberAlgebra:
    """Clifford generators c(e_1)..c(e_2n) on Lambda^{0,*}.

    Built from the complex-linear extension c(w_j) = sqrt(2) wbar^j ^,
    c(wbar_j) = -sqrt(2) i_{wbar_j}, so in the real frame
        c(e_{2j})   = wbar^j ^  -  i_{wbar_j},
        c(e_{2j-1}) = i (wbar^j ^  +  i_{wbar_j}).
    """
    if not 1 <= n <= 6:
        raise CliffordError(f"half-dimension must be in [1, 6], got {n}")
    basis = _basis_subsets(n)
    dim = len(basis)
    index = {s: i for i, s in enumerate(basis)}
    degree = np.array([len(s) for s in basis])

    wedge = np.zeros((n, dim, dim), dtype=complex)
    contr = np.zeros((n, dim, dim), dtype=complex)
    for j in range(1, n + 1):
        for i, s in enumerate(basis):
            if j not in s:
                # wbar^j ^ (wbar^S) = (-1)^{#{l in S : l < j}} wbar^{S u j}
                sign = (-1) ** sum(1 for l in s if l < j)
                t = tuple(sorted(s + (j,)))
                wedge[j - 1, index[t], i] = sign
            else:
                sign = (-1) ** sum(1 for l in s if l < j)
                t = tuple(l for l in s if l != j)
                contr[j - 1, index[t], i] = sign

    gens = np.zeros((2 * n, dim, dim), dtype=complex)
    for j in range(n):
        a, b = wedge[j], contr[j]
        gens[2 * j + 1] = a - b          # c(e_{2j}),   even axis index 2j+1
        gens[2 * j] = 1j * (a + b)       # c(e_{2j-1}), 0-based axis 2j

    number = np.zeros((n, dim))
    for j in range(n):
        number[j] = np.real(np.diag(wedge[j] @ contr[j]))

    return FiberAlgebra(
        n=n,
        dim_fiber=dim,
        basis=tuple(basis),
        degree_grading=degree,
        generators=gens,
        wedge=wedge,
        contraction=contr,
        number_ops=number,
    )


def omega_d_matrix(algebra: FiberAlgebra, a: tuple[float, ...]) -> np.ndarray:
    """omega_d = -2 pi sum_l a_l wbar^l ^ i_{wbar_l}; diagonal in the monomial
    basis with entry -2 pi sum_{j in S} a_j on the monomial wbar^S."""
    if len(a) != algebra.n:
        raise CliffordError(f"need {algebra.n} eigenvalues, got {len(a)}")
    if any(x <= 0 for x in a):
        raise CliffordError("J0 eigenvalues must be positive")
    diag = np.zeros(algebra.dim_fiber)
    for j, aj in enumerate(a):
        diag -= 2 * np.pi * aj * algebra.number_ops[j]
    return np.diag(diag).astype(complex)


def cr_endomorphism(algebra: FiberAlgebra, curvature_2form: np.ndarray) -> np.ndarray:
    """Curvature endomorphism sum_{l<m} F(e_l, e_m) c(e_l) c(e_m) for a
    (purely imaginary valued) antisymmetric 2-form F = R^E + tr[R^{T(1,0)}]/2.

    The result is Hermitian because each c(e_l)c(e_m) with l < m is
    skew-Hermitian and the coefficients are purely imaginary.
    """
    d = 2 * algebra.n
    F = np.asarray(curvature_2form, dtype=complex)
    if F.shape != (d, d):
        raise CliffordError(f"curvature 2-form must be {d}x{d}, got {F.shape}")
    if not np.allclose(F, -F.T, atol=1e-12 * max(1.0, np.abs(F).max())):
        raise CliffordError("curvature input is not antisymmetric")
    out = np.zeros((algebra.dim_fiber, algebra.dim_fiber), dtype=complex)
    g = algebra.generators
    for l in range(d):
        for m in range(l + 1, d):
            if F[l, m] != 0:
                out += F[l, m] * (g[l] @ g[m])
    return out
