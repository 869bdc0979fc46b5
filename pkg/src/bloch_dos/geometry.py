"""Phase-space shell geometry: the spectral shell, regular directions, and
the structural constants governing the high-energy regime.

For spectral radius rho (energy lambda = rho^2) and potential bound v, the
shell A collects the xi with ||xi|^2 - rho^2| <= 40 v.  Inside it, B keeps
only the xi whose projections onto every short dual-lattice direction stay
above sqrt(rho); those are the directions along which perturbation theory
controls a band through the shell.  The Monte-Carlo estimator measures how
much of the unit sphere survives that exclusion as rho grows.

The constants R = rho^(1/(36 d^2 (d+2))) and M = 5 d^2 + 7 d calibrate the
asymptotic regime; the preset theta radius 6 M R excludes every direction at
any desk-scale rho in d = 2, so experiments use small overrides and study the
trend in rho instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .lattice import DualLattice, points_in_ball

__all__ = [
    "GeometryParams",
    "structural_constants",
    "asymptotic_theta_radius",
    "in_A",
    "in_B",
    "regular_direction_fraction",
    "fraction_ci_halfwidth",
]

# relative slack for the shell membership test: radii constructed to sit
# exactly on the shell boundary must not fall out through rounding
_SHELL_RTOL = 1e-12


@dataclass(frozen=True)
class GeometryParams:
    """Shell parameters: spectral radius rho, potential bound v, dimension d,
    and the lattice-ball radius used for the direction constraints."""

    rho: float
    v: float
    d: int
    theta_radius: float

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise PreconditionError(f"rho must be positive, got {self.rho}")
        if self.v < 0:
            raise PreconditionError(f"v must be nonnegative, got {self.v}")
        if self.d < 2:
            raise PreconditionError(f"dimension must be at least 2, got {self.d}")
        if self.theta_radius <= 0:
            raise PreconditionError(f"theta_radius must be positive, got {self.theta_radius}")

    @property
    def lam(self) -> float:
        return self.rho**2

    @property
    def J(self) -> tuple[float, float]:
        """Energy interval [lambda - 20 v, lambda + 20 v]."""
        return (self.lam - 20.0 * self.v, self.lam + 20.0 * self.v)


def structural_constants(rho: float, d: int) -> tuple[float, float]:
    """(R, M) with R = rho^(1/(36 d^2 (d+2))) and M = 5 d^2 + 7 d."""
    if rho <= 1:
        raise PreconditionError(f"rho must exceed 1, got {rho}")
    if d < 2:
        raise PreconditionError(f"dimension must be at least 2, got {d}")
    R = rho ** (1.0 / (36.0 * d * d * (d + 2)))
    M = float(5 * d * d + 7 * d)
    return R, M


def asymptotic_theta_radius(rho: float, d: int) -> float:
    """The preset direction-ball radius 6 M R for the asymptotic regime."""
    R, M = structural_constants(rho, d)
    return 6.0 * M * R


def in_A(xi: np.ndarray, params: GeometryParams) -> bool:
    """Shell membership: | |xi|^2 - rho^2 | <= 40 v, with a rounding guard so
    radii constructed exactly on the boundary stay inside."""
    xi = np.asarray(xi, dtype=float)
    r2 = float(xi @ xi)
    rho2 = params.rho**2
    return abs(r2 - rho2) <= 40.0 * params.v + _SHELL_RTOL * (r2 + rho2)


def _direction_matrix(D: DualLattice, radius: float) -> np.ndarray:
    pts = points_in_ball(D, radius, exclude_origin=True)
    if len(pts) == 0:
        return np.zeros((0, D.dim))
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def in_B(xi: np.ndarray, params: GeometryParams, D: DualLattice) -> bool:
    """True iff xi is in the shell and |<xi, eta/|eta|>| > sqrt(rho) for every
    nonzero lattice point eta with |eta| <= theta_radius."""
    if not in_A(xi, params):
        return False
    xi = np.asarray(xi, dtype=float)
    U = _direction_matrix(D, params.theta_radius)
    if len(U) == 0:
        return True
    return bool(np.all(np.abs(U @ xi) > math.sqrt(params.rho)))


def _shell_radii(params: GeometryParams, count: int = 16) -> np.ndarray:
    lo2 = params.rho**2 - 40.0 * params.v
    hi2 = params.rho**2 + 40.0 * params.v
    if lo2 < 0:
        raise PreconditionError(
            f"shell reaches the origin (rho^2 = {params.rho**2} <= 40 v = {40 * params.v})"
        )
    return np.linspace(math.sqrt(lo2), math.sqrt(hi2), count)


def regular_direction_fraction(
    params: GeometryParams,
    D: DualLattice,
    samples: int,
    seed: int,
) -> float:
    """Monte-Carlo measure of directions whose whole ray through the shell
    stays in B.

    Directions are uniform on the sphere (normalized Gaussians); each is
    tested at 16 evenly spaced radii across the shell.  Since the projection
    condition r |<x, u>| > sqrt(rho) is hardest at the smallest radius, the
    per-direction test reduces to the innermost one; the radii are kept
    explicit so the reduction stays checkable against in_B directly.
    """
    if samples < 1000:
        raise PreconditionError(f"need at least 1000 samples, got {samples}")
    radii = _shell_radii(params)
    r_min = float(radii[0])
    threshold = math.sqrt(params.rho) / r_min
    U = _direction_matrix(D, params.theta_radius)
    rng = np.random.default_rng(seed)
    d = params.d
    if D.dim != d:
        raise PreconditionError("lattice dimension does not match params.d")
    allowed = 0
    remaining = int(samples)
    chunk_rows = max(1, min(8192, int(2e7 / max(1, len(U)))))
    while remaining > 0:
        take = min(chunk_rows, remaining)
        X = rng.standard_normal((take, d))
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            raise PreconditionError("degenerate direction sample")
        X /= norms[:, None]
        if len(U) == 0:
            allowed += take
        else:
            proj_min = np.abs(X @ U.T).min(axis=1)
            allowed += int(np.count_nonzero(proj_min > threshold))
        remaining -= take
    return allowed / float(samples)


def fraction_ci_halfwidth(fraction: float, samples: int) -> float:
    """95% binomial half-width for a Monte-Carlo fraction estimate."""
    if samples <= 0:
        raise PreconditionError("samples must be positive")
    return 1.96 * math.sqrt(max(fraction * (1.0 - fraction), 0.0) / samples)
