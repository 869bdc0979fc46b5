"""Period lattices, dual lattices, and Brillouin-zone geometry.

A lattice is stored as a row-major basis matrix (rows are generators).  The
dual lattice carries the 2*pi pairing convention <m_i, a_j> = 2*pi*delta_ij,
so the dual of the unit cube lattice is (2*pi*Z)^d and vice versa.

The first Brillouin zone is realized as the Voronoi cell of the dual lattice.
``decompose`` splits any vector xi into a nearest dual-lattice point plus a
remainder inside that cell, with deterministic lexicographic tie-breaking on
the (measure-zero) cell boundary.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverError

__all__ = [
    "Lattice",
    "DualLattice",
    "Decomposition",
    "dual_lattice",
    "decompose",
    "brillouin_radius",
    "points_in_ball",
    "packing_constant_W",
]

# Relative slack used when testing membership of boundary points in closed
# balls; keeps integer-radius shells (|n| = r exactly) inside the result.
_BALL_RTOL = 1e-12


def _validated_basis(basis: object) -> np.ndarray:
    b = np.array(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ConfigError(f"lattice basis must be a square matrix, got shape {b.shape}")
    d = b.shape[0]
    if d < 2:
        raise ConfigError(f"lattice dimension must be at least 2, got {d}")
    if not np.all(np.isfinite(b)):
        raise ConfigError("lattice basis contains non-finite entries")
    det = np.linalg.det(b)
    scale = float(np.abs(b).max())
    if abs(det) <= 1e-12 * max(scale, 1.0) ** d:
        raise ConfigError("lattice basis is singular or nearly singular")
    b.setflags(write=False)
    return b


@dataclass(frozen=True, eq=False)
class Lattice:
    """Full-rank lattice in R^d; ``basis`` rows are the generators."""

    basis: np.ndarray
    dim: int = field(init=False)
    cell_volume: float = field(init=False)

    def __post_init__(self) -> None:
        b = _validated_basis(self.basis)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "dim", b.shape[0])
        object.__setattr__(self, "cell_volume", float(abs(np.linalg.det(b))))
        object.__setattr__(self, "_cache", {})


@dataclass(frozen=True, eq=False)
class DualLattice(Lattice):
    """Dual of ``parent`` under the pairing <m_i, a_j> = 2*pi*delta_ij."""

    parent: Lattice = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.parent is None:
            raise ConfigError("DualLattice requires its primal lattice as parent")
        gram = self.basis @ self.parent.basis.T
        target = 2.0 * math.pi * np.eye(self.dim)
        if not np.allclose(gram, target, rtol=0.0, atol=1e-9 * 2.0 * math.pi):
            raise ConfigError("dual basis does not satisfy <m_i, a_j> = 2*pi*delta_ij")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Split xi = integer_part + fractional_part with the integer part in the lattice."""

    integer_part: np.ndarray
    fractional_part: np.ndarray
    coords: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return self.integer_part

    @property
    def k(self) -> np.ndarray:
        return self.fractional_part


def dual_lattice(L: Lattice) -> DualLattice:
    """Dual lattice with basis rows m_i satisfying <m_i, a_j> = 2*pi*delta_ij.

    Applying it to a ``DualLattice`` recovers (a copy of) the primal basis,
    so the construction is an involution up to round-off.
    """
    basis_dual = 2.0 * math.pi * np.linalg.inv(L.basis).T
    return DualLattice(basis=basis_dual, parent=L)


def _half_diagonal(D: Lattice) -> float:
    """max over sign patterns of |sum_i +-b_i| / 2; bounds the covering radius."""
    best = 0.0
    # the overall sign is irrelevant, so fix the first generator's sign
    for signs in itertools.product((-1.0, 1.0), repeat=D.dim - 1):
        v = D.basis[0] + np.asarray(signs) @ D.basis[1:]
        best = max(best, float(np.linalg.norm(v)))
    return 0.5 * best


def _points_and_coords(D: Lattice, r: float, exclude_origin: bool) -> tuple[np.ndarray, np.ndarray]:
    if r < 0:
        raise ConfigError(f"ball radius must be nonnegative, got {r}")
    d = D.dim
    r_eff = r * (1.0 + _BALL_RTOL) + 1e-15
    inv = np.linalg.inv(D.basis)
    # coords c of a point p = c @ basis satisfy |c_i| <= r * ||inv[:, i]||
    bounds = np.floor(r_eff * np.linalg.norm(inv, axis=0) + 1e-9).astype(int)
    if np.prod(2.0 * bounds.astype(float) + 1.0) > 4e7:
        raise SolverError(f"points_in_ball: enumeration box too large for r={r}")
    axes = [np.arange(-int(m), int(m) + 1) for m in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    pts = coords @ D.basis
    r2 = np.einsum("ij,ij->i", pts, pts)
    keep = r2 <= r_eff * r_eff
    if exclude_origin:
        keep &= np.any(coords != 0, axis=1)
    coords = coords[keep]
    pts = pts[keep]
    r2 = r2[keep]
    order = np.lexsort(tuple(pts[:, j] for j in range(d - 1, -1, -1)) + (r2,))
    return pts[order], coords[order]


def points_in_ball(D: Lattice, r: float, exclude_origin: bool = False) -> np.ndarray:
    """All lattice points with |n| <= r, sorted by (|n|, lexicographic)."""
    pts, _ = _points_and_coords(D, r, exclude_origin)
    return pts


def _nn_offsets(D: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Offsets (coords, points) covering every possible nearest neighbour of a
    coordinate-rounded base point, pre-sorted lexicographically by point."""
    cache = D.__dict__.get("_cache") if hasattr(D, "__dict__") else None
    key = "nn_offsets"
    if cache is not None and key in cache:
        return cache[key]
    h = _half_diagonal(D)
    pts, coords = _points_and_coords(D, 2.0 * h * (1.0 + 1e-9) + 1e-12, exclude_origin=False)
    order = np.lexsort(tuple(pts[:, j] for j in range(D.dim - 1, -1, -1)))
    result = (coords[order], pts[order])
    if cache is not None:
        cache[key] = result
    return result


def _decompose_batch(Xi: np.ndarray, D: Lattice) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized nearest-point decomposition; returns (coords, points, remainders)."""
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    offs_coords, offs_pts = _nn_offsets(D)
    inv = np.linalg.inv(D.basis)
    base_coords = np.round(Xi @ inv).astype(np.int64)
    base_pts = base_coords @ D.basis
    # candidate points: base + offset, offsets already in lex order of point
    diff = Xi[:, None, :] - (base_pts[:, None, :] + offs_pts[None, :, :])
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    dmin = dist2.min(axis=1)
    tol = 1e-12 * (1.0 + dmin)
    # first candidate (in lex order) within tolerance of the minimum
    pick = np.argmax(dist2 <= (dmin + tol)[:, None], axis=1)
    coords = base_coords + offs_coords[pick]
    n = coords @ D.basis
    k = Xi - n
    return coords, n, k


def decompose(xi: np.ndarray, D: DualLattice) -> Decomposition:
    """Split xi into a nearest lattice point plus remainder in the Voronoi cell.

    Ties on the cell boundary go to the lexicographically smallest lattice
    point, so the map xi -> (n, k) is a deterministic function.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (D.dim,):
        raise ConfigError(f"xi must be a vector of length {D.dim}, got shape {xi.shape}")
    coords, n, k = _decompose_batch(xi[None, :], D)
    return Decomposition(integer_part=n[0], fractional_part=k[0], coords=coords[0])


def _covering_radius_bound(D: Lattice) -> float:
    """Covering radius: exact Voronoi circumradius for d <= 3, else half-diagonal."""
    if D.dim <= 3:
        return _voronoi_circumradius(D)
    return _half_diagonal(D)


def _voronoi_circumradius(D: Lattice) -> float:
    d = D.dim
    h = _half_diagonal(D)
    facets = points_in_ball(D, 2.0 * h * (1.0 + 1e-9) + 1e-12, exclude_origin=True)
    rhs = 0.5 * np.einsum("ij,ij->i", facets, facets)
    m = len(facets)
    best = 0.0
    scale = float(np.linalg.norm(facets, axis=1).max())
    for idx in itertools.combinations(range(m), d):
        A = facets[list(idx)]
        if abs(np.linalg.det(A)) <= 1e-12 * scale**d:
            continue
        x = np.linalg.solve(A, rhs[list(idx)])
        # vertex of the cell iff it violates no other half-space constraint
        if np.all(facets @ x <= rhs + 1e-9 * (1.0 + 2.0 * rhs)):
            best = max(best, float(np.linalg.norm(x)))
    return best


def brillouin_radius(D: DualLattice) -> float:
    """Largest distance from the origin to the Voronoi cell of the lattice.

    Exact (vertex enumeration over the facet shell) for d <= 3.  For d >= 4
    returns the half-diagonal upper bound and emits a warning, since vertex
    enumeration cost grows too fast to certify exactness.
    """
    if D.dim <= 3:
        return _voronoi_circumradius(D)
    warnings.warn(
        "brillouin_radius: dimension > 3, returning a certified upper bound, not the exact value",
        stacklevel=2,
    )
    return _half_diagonal(D)


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def packing_constant_W(
    D: Lattice,
    initial_radius: float = 50.0,
    max_doublings: int = 6,
) -> float:
    """sup over r > 1 of r^{-d} * #{lattice points with |l| <= r}.

    The counting function jumps only at radii r = |l|, and between jumps the
    ratio decreases in r, so the sup over (1, R] is attained either as r -> 1+
    or at a jump radius.  For r > R the count is bounded by
    vol(B(r + c)) / cell_volume with c the covering radius; R is doubled until
    that tail bound drops below the scanned maximum.
    """
    d = D.dim
    c = _covering_radius_bound(D)
    dens = _unit_ball_volume(d) / D.cell_volume
    R = float(initial_radius)
    for _ in range(max_doublings):
        if dens * (R + c) ** d > 2e7:
            raise SolverError("packing_constant_W: cannot certify the sup within the point budget")
        pts = points_in_ball(D, R)
        norms = np.linalg.norm(pts, axis=1)
        norms.sort()
        best = float(np.searchsorted(norms, 1.0 + 1e-9, side="right"))  # r -> 1+ limit
        jump_radii = np.unique(norms[norms > 1.0 + 1e-9])
        for r in jump_radii:
            count = np.searchsorted(norms, r * (1.0 + _BALL_RTOL), side="right")
            best = max(best, count / r**d)
        tail = dens * (1.0 + c / R) ** d
        if tail <= best:
            return best
        R *= 2.0
    raise SolverError("packing_constant_W: tail bound did not close; lattice too dense")
