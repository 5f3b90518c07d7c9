"""U(1) lattice gauge fields realizing the twisted connection on tensor
powers of the line bundle, plus an auxiliary bundle modeled as a direct sum
of constant-curvature U(1) twists.

Link layout: for half-dimension n the lattice is (N,)*2n with axis 2j the
x-coordinate of plane j and axis 2j+1 its y-coordinate (0-based planes).
Links are stored per auxiliary-bundle component as unit complex arrays of
shape (rank_E, 2n, N, ..., N); component i carries the combined phases of
L^k tensored with the i-th U(1) summand of E.

Gauge convention (Landau type): within plane j with total integer flux
F = k*chern_j + chernE_{i,j}, the y-links are exp(-i Phi * x) with
Phi = 2*pi*F/N^2 and the x-links are trivial except the wrap column
x = N-1, which carries exp(+i Phi * N * y).  The counterclockwise plaquette
product is then exp(-i Phi) on every plaquette, including the corner,
because Phi * N^2 is an exact multiple of 2*pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ManifoldKind, ModelManifold

__all__ = [
    "GaugeField",
    "GaugeError",
    "assign_line_bundle",
    "tensor_power",
    "plaquette_phases",
    "total_flux_winding",
    "random_gauge_transform",
    "apply_gauge",
    "serialize_links",
    "deserialize_links",
]


class GaugeError(ValueError):
    pass


@dataclass(frozen=True)
class GaugeField:
    n: int
    resolution: int
    k: int
    chern: tuple[int, ...]                      # per 2-plane, line-bundle part
    rank_E: int
    chern_E: tuple[tuple[int, ...], ...]        # per component, per 2-plane
    links: np.ndarray                           # (rank_E, 2n, N,...,N) complex

    @property
    def lattice_shape(self) -> tuple[int, ...]:
        return (self.resolution,) * (2 * self.n)

    def component_flux(self, comp: int, plane: int) -> float:
        """Uniform plaquette flux angle of component `comp` in plane `plane`."""
        F = self.k * self.chern[plane] + self.chern_E[comp][plane]
        return 2 * np.pi * F / self.resolution ** 2


def _landau_links(n: int, N: int, fluxes: tuple[int, ...]) -> np.ndarray:
    """Links of a single U(1) component with total flux fluxes[j] per plane."""
    shape = (N,) * (2 * n)
    links = np.ones((2 * n,) + shape, dtype=complex)
    coords = np.indices(shape)
    for j, F in enumerate(fluxes):
        phi = 2 * np.pi * F / N ** 2
        x, y = coords[2 * j], coords[2 * j + 1]
        links[2 * j + 1] = links[2 * j + 1] * np.exp(-1j * phi * x)
        wrap = np.exp(1j * phi * N * y) * (x == N - 1) + 1.0 * (x < N - 1)
        links[2 * j] = links[2 * j] * wrap
    return links


def assign_line_bundle(
    model: ModelManifold,
    k: int,
    chern: tuple[int, ...] | None = None,
    rank_E: int = 1,
    chern_E: tuple[tuple[int, ...], ...] | None = None,
) -> GaugeField:
    """Uniform-flux gauge field for L^k tensor E on the torus lattice.

    `chern` must match the integral periods stored in the model; `chern_E`
    gives one integer per (component, plane) for the auxiliary twists and
    defaults to the trivial bundle.
    """
    if model.kind is not ManifoldKind.FLAT_TORUS:
        raise GaugeError("gauge fields are lattice data; use the analytic "
                         "backend for the sphere")
    if k < 0:
        raise GaugeError(f"tensor power must be >= 0, got {k}")
    n, N = model.n, model.resolution
    if chern is None:
        chern = model.chern
    chern = tuple(int(c) for c in chern)
    if chern != model.chern:
        raise GaugeError(
            f"requested chern {chern} does not match the symplectic periods "
            f"{model.chern} of the model"
        )
    if rank_E < 1:
        raise GaugeError(f"rank of E must be >= 1, got {rank_E}")
    if chern_E is None:
        chern_E = tuple((0,) * n for _ in range(rank_E))
    chern_E = tuple(tuple(int(e) for e in row) for row in chern_E)
    if len(chern_E) != rank_E or any(len(row) != n for row in chern_E):
        raise GaugeError("chern_E must supply one integer per component "
                         "and plane")

    links = np.empty((rank_E, 2 * n) + (N,) * (2 * n), dtype=complex)
    for i in range(rank_E):
        fluxes = tuple(k * chern[j] + chern_E[i][j] for j in range(n))
        links[i] = _landau_links(n, N, fluxes)
    return GaugeField(
        n=n, resolution=N, k=k, chern=chern,
        rank_E=rank_E, chern_E=chern_E, links=links,
    )


def tensor_power(field: GaugeField, m: int) -> GaugeField:
    """Raise every link phase to the m-th power; all flux data scales by m."""
    if m < 0:
        raise GaugeError(f"tensor power must be >= 0, got {m}")
    return GaugeField(
        n=field.n,
        resolution=field.resolution,
        k=m * field.k,
        chern=field.chern,
        rank_E=field.rank_E,
        chern_E=tuple(tuple(m * e for e in row) for row in field.chern_E),
        links=field.links ** m,
    )


def plaquette_phases(field: GaugeField, comp: int, plane: int) -> np.ndarray:
    """Counterclockwise plaquette products W(s) = U_x(s) U_y(s+x) *
    conj(U_x(s+y)) * conj(U_y(s)) in the given plane."""
    ax_x, ax_y = 2 * plane, 2 * plane + 1
    ux = field.links[comp, ax_x]
    uy = field.links[comp, ax_y]
    # s + x / s + y reached by rolling the field backwards along the axis
    uy_xp = np.roll(uy, -1, axis=ax_x)
    ux_yp = np.roll(ux, -1, axis=ax_y)
    return ux * uy_xp * ux_yp.conj() * uy.conj()


def total_flux_winding(field: GaugeField, comp: int, plane: int) -> int:
    """Total flux through the plane as an exact integer winding number:
    -sum of principal plaquette angles / 2 pi, summed over one 2-cell's
    worth of plaquettes (all lattice sites)."""
    ang = np.angle(plaquette_phases(field, comp, plane))
    total = -ang.sum() / (2 * np.pi)
    w = round(float(total) / field.resolution ** (2 * field.n - 2))
    return int(w)


def random_gauge_transform(field: GaugeField, seed: int) -> GaugeField:
    """Apply a random site-local U(1) transformation; spectra of all
    assembled operators must be invariant."""
    rng = np.random.default_rng(seed)
    phases = np.exp(2j * np.pi * rng.random(field.lattice_shape))
    return apply_gauge(field, phases)


def apply_gauge(field: GaugeField, g: np.ndarray) -> GaugeField:
    """U'_mu(s) = g(s) U_mu(s) conj(g(s+mu)) for a unit complex site field g."""
    g = np.asarray(g, dtype=complex)
    if g.shape != field.lattice_shape:
        raise GaugeError(f"gauge function shape {g.shape} does not match "
                         f"lattice {field.lattice_shape}")
    if not np.allclose(np.abs(g), 1.0, atol=1e-12):
        raise GaugeError("gauge function must be unit complex")
    links = field.links.copy()
    for mu in range(2 * field.n):
        gp = np.roll(g, -1, axis=mu)
        links[:, mu] = g * links[:, mu] * gp.conj()
    return GaugeField(
        n=field.n, resolution=field.resolution, k=field.k, chern=field.chern,
        rank_E=field.rank_E, chern_E=field.chern_E, links=links,
    )


def serialize_links(field: GaugeField) -> str:
    """Text serialization: a header line, then one line per link with
    "component site_index direction re im" (site_index in C order)."""
    lines = [
        f"diracgap-gauge n={field.n} N={field.resolution} k={field.k} "
        f"chern={','.join(map(str, field.chern))} rankE={field.rank_E} "
        f"chernE={';'.join(','.join(map(str, r)) for r in field.chern_E)}"
    ]
    flat = field.links.reshape(field.rank_E, 2 * field.n, -1)
    for i in range(field.rank_E):
        for mu in range(2 * field.n):
            for s, z in enumerate(flat[i, mu]):
                lines.append(f"{i} {s} {mu} {z.real:.17g} {z.imag:.17g}")
    return "\n".join(lines) + "\n"


def deserialize_links(text: str) -> GaugeField:
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("diracgap-gauge "):
        raise GaugeError("missing gauge serialization header")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    n, N, k = int(meta["n"]), int(meta["N"]), int(meta["k"])
    chern = tuple(int(c) for c in meta["chern"].split(","))
    rank_E = int(meta["rankE"])
    chern_E = tuple(tuple(int(e) for e in row.split(","))
                    for row in meta["chernE"].split(";"))
    shape = (rank_E, 2 * n) + (N,) * (2 * n)
    flat = np.zeros((rank_E, 2 * n, N ** (2 * n)), dtype=complex)
    seen = 0
    for line in lines[1:]:
        i, s, mu, re, im = line.split()
        flat[int(i), int(mu), int(s)] = float(re) + 1j * float(im)
        seen += 1
    if seen != rank_E * 2 * n * N ** (2 * n):
        raise GaugeError(f"expected {rank_E * 2 * n * N ** (2 * n)} link "
                         f"lines, got {seen}")
    return GaugeField(
        n=n, resolution=N, k=k, chern=chern, rank_E=rank_E, chern_E=chern_E,
        links=flat.reshape(shape),
    )
