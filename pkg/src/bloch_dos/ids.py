"""Integrated density of states by Brillouin-zone quadrature.

The IDS at energy lambda is the k-average of the eigenvalue counting function
of the fibre matrices,

    N(lambda) = (2*pi)^(-d) integral over the Brillouin zone of
                #{j : lambda_j(k) < lambda} dk,

approximated on a uniform G^d grid over a fundamental parallelepiped of the
dual lattice (the fibre spectra are periodic in k modulo the dual lattice, so
any fundamental domain integrates identically).  Windowed counts difference
the two endpoint counts per k-point before summation, which cancels the
common quadrature bias; the reported ratio compares the window against the
free-reference floor (omega_d / (2 (2*pi)^d)) * eps * lambda^((d-2)/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigError, CutoffTooSmallError, PreconditionError
from .fibre import assemble, count_below
from .lattice import DualLattice, _decompose_batch
from .potential import PotentialSpec

__all__ = [
    "QuadratureGrid",
    "IdsReport",
    "WindowReport",
    "Subwindow",
    "FreeReference",
    "free_reference",
    "ids",
    "window",
    "partition_window",
]

QUADRATURE_DOMAIN = "fundamental-parallelepiped"


class FreeReference(NamedTuple):
    omega_d: float
    n0: float
    g0: float


def free_reference(lam: float, d: int) -> FreeReference:
    """Sphere area omega_d, free IDS N0, and free DOS g0 at energy lam."""
    if d < 2:
        raise PreconditionError(f"dimension must be at least 2, got {d}")
    if lam < 0:
        raise PreconditionError(f"lambda must be nonnegative, got {lam}")
    omega_d = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    n0 = (2.0 * math.pi) ** (-d) * omega_d / d * lam ** (d / 2.0)
    g0 = (2.0 * math.pi) ** (-d) * omega_d * lam ** ((d - 2) / 2.0) / 2.0
    return FreeReference(omega_d=omega_d, n0=n0, g0=g0)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Uniform G^d grid over a fundamental parallelepiped, reduced to the
    Brillouin zone; weight chosen so that sum(weight * counts) is the IDS."""

    dual: DualLattice
    per_dim: int
    points: np.ndarray = field(init=False)
    weight: float = field(init=False)

    def __post_init__(self) -> None:
        G = self.per_dim
        if G < 1:
            raise ConfigError(f"grid per_dim must be positive, got {G}")
        d = self.dual.dim
        if float(G) ** d > 2e7:
            raise ConfigError(f"quadrature grid G={G} too large in dimension {d}")
        axes = [np.arange(G) / G for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        frac = np.stack([m.ravel() for m in mesh], axis=1)
        raw = frac @ self.dual.basis
        _, _, k = _decompose_batch(raw, self.dual)
        cell_volume_primal = (2.0 * math.pi) ** d / self.dual.cell_volume
        weight = 1.0 / (cell_volume_primal * float(G) ** d)
        total = weight * len(k)
        if abs(total - 1.0 / cell_volume_primal) > 1e-12 * max(1.0, total):
            raise ConfigError("quadrature weights do not sum to 1/cell_volume")
        k.setflags(write=False)
        object.__setattr__(self, "points", k)
        object.__setattr__(self, "weight", weight)

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class IdsReport:
    lam: float
    value: float
    grid: int
    cutoff: float
    free_reference: float
    counts_min: int
    counts_max: int
    quadrature_domain: str = QUADRATURE_DOMAIN


@dataclass(frozen=True)
class WindowReport:
    lam: float
    epsilon: float
    window: float
    floor: float
    ratio: float
    grid: int
    cutoff: float
    quadrature_domain: str = QUADRATURE_DOMAIN


@dataclass(frozen=True)
class Subwindow:
    lo: float
    hi: float
    rho: float


def _count_chunk(
    V: PotentialSpec, ks: np.ndarray, lams: tuple[float, ...], cutoff: float
) -> np.ndarray:
    out = np.zeros((len(ks), len(lams)), dtype=np.int64)
    for i, k in enumerate(ks):
        A = assemble(V, k, cutoff, dense_threshold=0)
        for j, lam in enumerate(lams):
            out[i, j] = count_below(A, lam)
    return out


def _counts_on_grid(
    V: PotentialSpec,
    grid: QuadratureGrid,
    lams: tuple[float, ...],
    cutoff: float,
    workers: int,
) -> np.ndarray:
    if workers <= 1:
        return _count_chunk(V, grid.points, lams, cutoff)
    chunks = np.array_split(grid.points, workers * 4)
    parts = Parallel(n_jobs=workers)(
        delayed(_count_chunk)(V, chunk, lams, cutoff) for chunk in chunks if len(chunk)
    )
    # chunk order is fixed, so the reduction is deterministic
    return np.concatenate(parts, axis=0)


def _validate_setup(
    V: PotentialSpec, grid: QuadratureGrid, lam_top: float, cutoff: float, workers: int
) -> None:
    if not np.array_equal(V.lattice.basis, grid.dual.basis):
        raise ConfigError("potential and quadrature grid use different dual lattices")
    if workers < 1:
        raise ConfigError(f"workers must be at least 1, got {workers}")
    v_up = V.coefficient_sum_bound
    required = math.sqrt(max(lam_top + 40.0 * v_up, 0.0))
    if cutoff < required:
        raise CutoffTooSmallError(
            f"cutoff {cutoff} below the spectral-shell radius {required:.6g}; "
            f"suggest {required + 2.0:.6g}"
        )


def _stabilization_probe(
    V: PotentialSpec,
    grid: QuadratureGrid,
    lams: tuple[float, ...],
    cutoff: float,
    probes: int,
) -> None:
    """Counts at a few probe k-points must be invariant under cutoff growth."""
    if probes <= 0:
        return
    idx = np.unique(np.linspace(0, grid.size - 1, min(probes, grid.size)).astype(int))
    ks = grid.points[idx]
    base = _count_chunk(V, ks, lams, cutoff)
    enlarged = _count_chunk(V, ks, lams, cutoff + 2.0)
    if not np.array_equal(base, enlarged):
        raise CutoffTooSmallError(
            f"counts changed when the cutoff was enlarged from {cutoff} to "
            f"{cutoff + 2.0}; suggest rerunning with cutoff {cutoff + 2.0:.6g}"
        )


def ids(
    V: PotentialSpec,
    lam: float,
    grid: QuadratureGrid,
    cutoff: float,
    *,
    workers: int = 1,
    stabilize: bool = True,
    probes: int = 5,
) -> IdsReport:
    """Quadrature IDS value at lam: sum of weight * count_below over the grid."""
    lam = float(lam)
    _validate_setup(V, grid, lam, cutoff, workers)
    if stabilize:
        _stabilization_probe(V, grid, (lam,), cutoff, probes)
    counts = _counts_on_grid(V, grid, (lam,), cutoff, workers)[:, 0]
    value = float(counts.sum() * grid.weight)
    d = V.lattice.dim
    return IdsReport(
        lam=lam,
        value=value,
        grid=grid.per_dim,
        cutoff=float(cutoff),
        free_reference=free_reference(max(lam, 0.0), d).n0,
        counts_min=int(counts.min()),
        counts_max=int(counts.max()),
    )


def window_floor(lam: float, eps: float, d: int) -> float:
    """Free-reference lower bound for the window: g0-type slope times width."""
    if lam <= 0 or eps <= 0:
        return 0.0
    omega_d = free_reference(lam, d).omega_d
    return omega_d / (2.0 * (2.0 * math.pi) ** d) * eps * lam ** ((d - 2) / 2.0)


def window(
    V: PotentialSpec,
    lam: float,
    eps: float,
    grid: QuadratureGrid,
    cutoff: float,
    *,
    workers: int = 1,
    stabilize: bool = True,
    probes: int = 5,
) -> WindowReport:
    """Windowed spectral count over [lam, lam+eps] against the free floor.

    Both endpoints use the same grid and cutoff, and the integer counts are
    differenced per k-point before the weighted sum.  eps may be 0, giving a
    zero window with an undefined (NaN) ratio.
    """
    lam = float(lam)
    eps = float(eps)
    if eps < 0:
        raise PreconditionError(f"epsilon must be nonnegative, got {eps}")
    _validate_setup(V, grid, lam + eps, cutoff, workers)
    d = V.lattice.dim
    if eps == 0.0:
        return WindowReport(
            lam=lam, epsilon=0.0, window=0.0, floor=0.0, ratio=math.nan,
            grid=grid.per_dim, cutoff=float(cutoff),
        )
    if stabilize:
        _stabilization_probe(V, grid, (lam, lam + eps), cutoff, probes)
    counts = _counts_on_grid(V, grid, (lam, lam + eps), cutoff, workers)
    diffs = counts[:, 1] - counts[:, 0]
    win = float(diffs.sum() * grid.weight)
    floor = window_floor(lam, eps, d)
    ratio = win / floor if floor > 0 else math.nan
    return WindowReport(
        lam=lam, epsilon=eps, window=win, floor=floor, ratio=ratio,
        grid=grid.per_dim, cutoff=float(cutoff),
    )


def partition_window(lam: float, eps: float, d: int) -> list[Subwindow]:
    """Split [lam, lam+eps] into equal subintervals of length <= 2 lam^(-(d+3)/2).

    Each subwindow carries rho = sqrt of its midpoint, the spectral radius at
    which narrower-than-resolution windows are analyzed.
    """
    if lam <= 0:
        raise PreconditionError(f"lambda must be positive, got {lam}")
    if eps <= 0:
        raise PreconditionError(f"epsilon must be positive, got {eps}")
    if d < 2:
        raise PreconditionError(f"dimension must be at least 2, got {d}")
    max_len = 2.0 * lam ** (-(d + 3) / 2.0)
    count = max(1, math.ceil(eps / max_len * (1.0 - 1e-12)))
    if count > 5e7:
        raise PreconditionError(f"partition would need {count} subwindows")
    edges = lam + eps * np.arange(count + 1) / count
    edges[-1] = lam + eps
    return [
        Subwindow(lo=float(lo), hi=float(hi), rho=float(math.sqrt((lo + hi) / 2.0)))
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
