"""Model manifolds: flat even tori with constant symplectic data, and the
round sphere with an analytic spectral backend.

Conventions (fixed once, everything downstream depends on them):
  * plane j (1-based) pairs the real axes (2j-2, 2j-1) in 0-based indexing,
    written (x_j, y_j); the unit frame vectors are e_{2j-1} ~ x_j, e_{2j} ~ y_j.
  * omega restricted to plane j is a_j * e^{2j} ^ e^{2j-1}, i.e.
    omega(e_{2j}, e_{2j-1}) = +a_j, which makes -i*J0 positive on T^(1,0).
  * w_j = (e_{2j} - i e_{2j-1}) / sqrt(2) spans T^(1,0) in plane j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "ManifoldKind",
    "ModelManifold",
    "FrameData",
    "GeometryError",
    "build_torus_model",
    "build_sphere_model",
    "frames",
]

INTEGRALITY_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric data (non-integral class, bad resolution, ...)."""


class ManifoldKind(Enum):
    FLAT_TORUS = "flat_torus"
    ROUND_SPHERE = "round_sphere"


@dataclass(frozen=True)
class ModelManifold:
    kind: ManifoldKind
    n: int                      # half-dimension
    sides: tuple[float, ...]    # torus side lengths, empty for the sphere
    resolution: int             # lattice points per axis, 0 for the sphere
    radius: float               # sphere radius, 0 for the torus
    j0_eigenvalues: tuple[float, ...]   # a_j > 0, constant over the manifold
    omega_coeffs: np.ndarray    # 2n x 2n antisymmetric, flat-chart components
    tau: float                  # 2*pi*sum(a_j), constant for both models
    lam: float                  # lambda = 2*pi*min(a_j)
    scalar_curvature: float     # K: 0 on the torus, 2/r^2 on the sphere
    torsion_a2: np.ndarray      # A2 tensor, identically zero for both models
    volume: float               # symplectic volume int omega^n / n!
    chern: tuple[int, ...] = field(default=())  # integral periods per plane

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def num_sites(self) -> int:
        if self.kind is not ManifoldKind.FLAT_TORUS:
            raise GeometryError("only the torus has a lattice site count")
        return self.resolution ** (2 * self.n)

    def spacing(self, axis: int) -> float:
        return self.sides[axis] / self.resolution

    def complex_structure(self) -> np.ndarray:
        """J in the real frame: J e_{2j-1} = -e_{2j}, J e_{2j} = e_{2j-1}."""
        d = 2 * self.n
        J = np.zeros((d, d))
        for j in range(self.n):
            J[2 * j, 2 * j + 1] = 1.0
            J[2 * j + 1, 2 * j] = -1.0
        return J

    def j0_matrix(self) -> np.ndarray:
        """J0 = sum_j a_j J restricted to plane j (skew, omega = g(J0 ., .))."""
        d = 2 * self.n
        J0 = np.zeros((d, d))
        for j, a in enumerate(self.j0_eigenvalues):
            J0[2 * j, 2 * j + 1] = a
            J0[2 * j + 1, 2 * j] = -a
        return J0


@dataclass(frozen=True)
class FrameData:
    """Per-site orthonormal frames; constant for both provided models, so a
    single copy is stored."""

    n: int
    w: np.ndarray       # n x 2n complex: w_j in the real basis
    e: np.ndarray       # 2n x 2n real: e_i rows (identity for flat models)

    def real_frame_from_w(self) -> np.ndarray:
        """Rebuild {e_i} from {w_j}: e_{2j} = (w_j + conj(w_j))/sqrt(2),
        e_{2j-1} = (i/sqrt(2)) (w_j - conj(w_j))."""
        out = np.zeros_like(self.e)
        for j in range(self.n):
            wj = self.w[j]
            out[2 * j + 1] = ((wj + wj.conj()) / np.sqrt(2)).real
            out[2 * j] = (1j / np.sqrt(2) * (wj - wj.conj())).real
        return out


def _omega_matrix(n: int, a: tuple[float, ...]) -> np.ndarray:
    omega = np.zeros((2 * n, 2 * n))
    for j, aj in enumerate(a):
        omega[2 * j + 1, 2 * j] = aj
        omega[2 * j, 2 * j + 1] = -aj
    return omega


def build_torus_model(
    n: int,
    sides: tuple[float, ...],
    resolution: int,
    a: tuple[float, ...],
) -> ModelManifold:
    """Flat torus T^{2n} with constant omega = sum_j a_j dy_j ^ dx_j.

    The symplectic class must be integral: the period over the j-th
    coordinate 2-cell, a_j * sides[2j] * sides[2j+1], has to be a positive
    integer (otherwise no prequantum line bundle exists).
    """
    sides = tuple(float(s) for s in sides)
    a = tuple(float(x) for x in a)
    if n < 1:
        raise GeometryError(f"half-dimension must be >= 1, got {n}")
    if len(sides) != 2 * n:
        raise GeometryError(f"need {2 * n} side lengths, got {len(sides)}")
    if len(a) != n:
        raise GeometryError(f"need {n} J0 eigenvalues, got {len(a)}")
    if resolution < 4:
        raise GeometryError(f"lattice resolution must be >= 4, got {resolution}")
    if any(s <= 0 for s in sides):
        raise GeometryError("side lengths must be positive")
    if any(x <= 0 for x in a):
        raise GeometryError("J0 eigenvalues a_j must be positive")

    chern = []
    for j, aj in enumerate(a):
        period = aj * sides[2 * j] * sides[2 * j + 1]
        c = round(period)
        if c < 1 or abs(period - c) > INTEGRALITY_TOL * max(1.0, abs(period)):
            raise GeometryError(
                f"symplectic period over plane {j + 1} is {period!r}; "
                "it must be a positive integer for L to exist"
            )
        chern.append(c)

    tau = 2 * np.pi * sum(a)
    lam = 2 * np.pi * min(a)
    volume = float(np.prod([aj * sides[2 * j] * sides[2 * j + 1]
                            for j, aj in enumerate(a)]))
    d = 2 * n
    return ModelManifold(
        kind=ManifoldKind.FLAT_TORUS,
        n=n,
        sides=sides,
        resolution=resolution,
        radius=0.0,
        j0_eigenvalues=a,
        omega_coeffs=_omega_matrix(n, a),
        tau=tau,
        lam=lam,
        scalar_curvature=0.0,
        torsion_a2=np.zeros((d, d, d)),
        volume=volume,
        chern=tuple(chern),
    )


def build_sphere_model(radius: float, total_flux: int) -> ModelManifold:
    """Round sphere of the given radius carrying omega with integral total
    flux int_{S^2} omega = total_flux.

    omega = (total_flux / (4 pi r^2)) dA, so a_1 = total_flux / (4 pi r^2),
    tau = lambda = total_flux / (2 r^2), and K = 2 / r^2.
    """
    if radius <= 0:
        raise GeometryError(f"radius must be positive, got {radius}")
    flux = round(float(total_flux))
    if abs(float(total_flux) - flux) > INTEGRALITY_TOL or flux < 1:
        raise GeometryError(
            f"int omega over S^2 must be a positive integer, got {total_flux!r}"
        )
    a1 = flux / (4 * np.pi * radius ** 2)
    return ModelManifold(
        kind=ManifoldKind.ROUND_SPHERE,
        n=1,
        sides=(),
        resolution=0,
        radius=float(radius),
        j0_eigenvalues=(a1,),
        omega_coeffs=_omega_matrix(1, (a1,)),
        tau=2 * np.pi * a1,
        lam=2 * np.pi * a1,
        scalar_curvature=2.0 / radius ** 2,
        torsion_a2=np.zeros((2, 2, 2)),
        volume=float(flux),
        chern=(flux,),
    )


def frames(model: ModelManifold) -> FrameData:
    """Orthonormal frame data; site-independent for both provided models."""
    n = model.n
    d = 2 * n
    e = np.eye(d)
    w = np.zeros((n, d), dtype=complex)
    for j in range(n):
        # w_j = (e_{2j} - i e_{2j-1}) / sqrt(2)
        w[j, 2 * j + 1] = 1.0 / np.sqrt(2)
        w[j, 2 * j] = -1j / np.sqrt(2)
    return FrameData(n=n, w=w, e=e)
