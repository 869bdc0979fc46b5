"""Fourier-coefficient decay and group-velocity bounds for high-energy bands.

For a band eigenpair (zeta, psi) of the fibre operator with zeta above an
explicit lattice-dependent threshold zeta0, the Fourier coefficients of psi
obey a polynomial decay bound

    |psi_n| < M_m * kappa^{-m} * |n|^{-(3m+1)/2}    for |n| >= (1+m*kappa)*sqrt(zeta),

and the band's group velocity obeys |grad zeta| <= 2*(1+eta)*sqrt(zeta).
This module computes the full constant chain (m, kappa, zeta0, M_1..M_m)
exactly from the potential's finite Fourier data and checks both bounds on
numerically computed eigenpairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PreconditionError, TrackingError
from .fibre import BandSolution, assemble, eigenpair_near, group_velocity
from .lattice import brillouin_radius, packing_constant_W
from .potential import PotentialSpec, sobolev_seminorm

logger = logging.getLogger(__name__)

#: Coefficients with modulus at or below this are treated as numerically zero
#: (their decay margin is +inf): an eigensolver cannot resolve amplitudes at
#: round-off level, and the true coefficients out there are far smaller still.
NOISE_FLOOR = 1e-12

#: Fraction of the basis radius beyond which coefficients are not tested:
#: truncation distorts the outermost shell, and the bound concerns the
#: untruncated operator.
TESTED_SHELL_OUTER = 0.9

#: Required slack of the basis radius over the decay threshold radius, so the
#: tested shell is nonempty and sits well inside the truncation.
CUTOFF_SAFETY = 1.15

#: Central-difference step for the finite-difference velocity check.
FD_STEP = 1e-4


@dataclass(frozen=True)
class DecayConstants:
    """Explicit constant chain entering the decay and velocity bounds."""

    d: int
    eta: float
    m: int
    kappa: float
    zeta0: float
    Mm_chain: tuple[float, ...]
    W: float
    Q: float

    @property
    def M_m(self) -> float:
        return self.Mm_chain[-1]

    @property
    def threshold_factor(self) -> float:
        """Tested coefficients start at threshold_factor * sqrt(zeta)."""
        return 1.0 + self.m * self.kappa

    def coefficient_bound(self, radii: np.ndarray) -> np.ndarray:
        """Decay bound M_m * kappa^{-m} * r^{-(3m+1)/2} at the given radii."""
        r = np.asarray(radii, dtype=float)
        return self.M_m * self.kappa ** (-self.m) * r ** (-(3 * self.m + 1) / 2.0)

    def speed_bound(self, zeta: float) -> float:
        """Group-velocity bound 2*(1+eta)*sqrt(zeta)."""
        return 2.0 * (1.0 + self.eta) * math.sqrt(zeta)


def decay_constants(V: PotentialSpec, d: int, eta: float, Q: float, W: float) -> DecayConstants:
    """Evaluate the constant chain for dimension d, margin eta, and lattice data Q, W.

    m = floor((d+1)/3) + 1, kappa = eta/(2m+1),
    zeta0 = max{36 Q^2 kappa^{-2}, (1+m kappa)^{2/(d-1)} kappa^{-2d/(d-1)}},
    M_1 = 6 V^{(0)}, and for j >= 2
    M_j = 6 (2^{3j/2-1} W^{1/2} V^{(0)} M_{j-1} + V^{(3(j-1)d/2)}),
    where V^{(s)} is the weighted-coefficient seminorm of order s.
    """
    if not 0.0 < eta < 1.0:
        raise ConfigError(f"eta must lie strictly inside (0, 1), got {eta}")
    if d < 2:
        raise ConfigError(f"dimension must be at least 2, got {d}")
    if Q <= 0.0 or W <= 0.0:
        raise ConfigError(f"lattice constants must be positive, got Q={Q}, W={W}")
    m = (d + 1) // 3 + 1
    kappa = eta / (2 * m + 1)
    zeta0 = max(
        36.0 * Q * Q / (kappa * kappa),
        (1.0 + m * kappa) ** (2.0 / (d - 1)) * kappa ** (-2.0 * d / (d - 1)),
    )
    v0 = sobolev_seminorm(V, 0.0)
    chain = [6.0 * v0]
    for j in range(2, m + 1):
        chain.append(
            6.0
            * (
                2.0 ** (3.0 * j / 2.0 - 1.0) * math.sqrt(W) * v0 * chain[-1]
                + sobolev_seminorm(V, 3.0 * (j - 1) * d / 2.0)
            )
        )
    return DecayConstants(
        d=d, eta=float(eta), m=m, kappa=kappa, zeta0=zeta0, Mm_chain=tuple(chain), W=float(W), Q=float(Q)
    )


def constants_for(V: PotentialSpec, eta: float) -> DecayConstants:
    """Constant chain with Q and W computed from the potential's own lattice."""
    Q = brillouin_radius(V.lattice)
    W = packing_constant_W(V.lattice)
    return decay_constants(V, V.lattice.dim, eta, Q, W)


@dataclass(frozen=True)
class DecayReport:
    """Outcome of checking the coefficient-decay bound on one eigenpair."""

    zeta: float
    threshold_radius: float
    checked: int
    violations: tuple[tuple[tuple[int, ...], float, float], ...]
    margin_min: float
    constants: DecayConstants
    k: tuple[float, ...]
    cutoff: float
    gap: float
    near_degenerate: bool

    def __post_init__(self):
        if (len(self.violations) == 0) != (self.margin_min >= 1.0):
            raise PreconditionError("violations must be empty exactly when margin_min >= 1")


def _solve_band(
    V: PotentialSpec, k, band_target: float, cutoff: float
) -> BandSolution:
    A = assemble(V, k, cutoff)
    return eigenpair_near(A, band_target)


def _require_zeta(zeta: float, constants: DecayConstants) -> None:
    if zeta < constants.zeta0:
        raise PreconditionError(
            f"eigenvalue zeta={zeta:.6g} is below the admissible threshold "
            f"zeta0={constants.zeta0:.6g} (shortfall {constants.zeta0 - zeta:.6g}); "
            f"the bounds only apply above zeta0"
        )


def _require_cutoff(cutoff: float, threshold_radius: float) -> None:
    needed = CUTOFF_SAFETY * threshold_radius
    if cutoff < needed:
        raise PreconditionError(
            f"basis radius {cutoff:.6g} leaves no tested shell: need at least "
            f"{needed:.6g} (= {CUTOFF_SAFETY} * threshold radius {threshold_radius:.6g})"
        )


def verify_decay(
    V: PotentialSpec, k, band_target: float, eta: float, cutoff: float
) -> DecayReport:
    """Check the coefficient-decay bound on the eigenpair nearest band_target.

    Tests every basis index n with (1+m*kappa)*sqrt(zeta) <= |n| <= 0.9*cutoff.
    A coefficient with |psi_n| <= NOISE_FLOOR is counted as checked with
    margin +inf.  A violation is recorded when bound/|psi_n| < 1.
    """
    constants = constants_for(V, eta)
    sol = _solve_band(V, k, band_target, cutoff)
    _require_zeta(sol.zeta, constants)
    threshold_radius = constants.threshold_factor * math.sqrt(sol.zeta)
    _require_cutoff(cutoff, threshold_radius)
    if sol.near_degenerate:
        logger.warning(
            "verify_decay: band at zeta=%.6g is near-degenerate (gap %.3e); "
            "coefficients may mix the eigenspace",
            sol.zeta,
            sol.gap,
        )
    radii = np.linalg.norm(sol.basis.indices, axis=1)
    tested = (radii >= threshold_radius) & (radii <= TESTED_SHELL_OUTER * cutoff)
    if not np.any(tested):
        raise PreconditionError(
            f"no basis indices in the tested shell [{threshold_radius:.6g}, "
            f"{TESTED_SHELL_OUTER * cutoff:.6g}]; enlarge the basis radius"
        )
    amps = np.abs(sol.vector[tested])
    bounds = constants.coefficient_bound(radii[tested])
    with np.errstate(divide="ignore"):
        margins = np.where(amps > NOISE_FLOOR, bounds / np.maximum(amps, NOISE_FLOOR), np.inf)
    bad = margins < 1.0
    coords = sol.basis.coords[tested]
    violations = tuple(
        (tuple(int(c) for c in coords[i]), float(amps[i]), float(bounds[i]))
        for i in np.flatnonzero(bad)
    )
    return DecayReport(
        zeta=sol.zeta,
        threshold_radius=threshold_radius,
        checked=int(np.count_nonzero(tested)),
        violations=violations,
        margin_min=float(np.min(margins)),
        constants=constants,
        k=tuple(float(x) for x in np.atleast_1d(np.asarray(k, dtype=float))),
        cutoff=float(cutoff),
        gap=sol.gap,
        near_degenerate=sol.near_degenerate,
    )


@dataclass(frozen=True)
class GradientReport:
    """Hellmann-Feynman vs finite-difference velocity and the speed bound."""

    hf_velocity: np.ndarray
    fd_velocity: np.ndarray
    bound_ok: bool
    zeta: float
    gap: float
    speed_bound: float
    constants: DecayConstants = field(repr=False)

    @property
    def hf_speed(self) -> float:
        return float(np.linalg.norm(self.hf_velocity))

    @property
    def fd_mismatch(self) -> float:
        """|hf - fd| / (1 + |hf|)."""
        return float(
            np.linalg.norm(self.hf_velocity - self.fd_velocity) / (1.0 + self.hf_speed)
        )


def verify_gradient(
    V: PotentialSpec,
    k,
    band_target: float,
    eta: float,
    cutoff: float,
    *,
    fd_step: float = FD_STEP,
) -> GradientReport:
    """Check |grad zeta| <= 2*(1+eta)*sqrt(zeta) on the band nearest band_target.

    The gradient is computed two ways: the Hellmann-Feynman sum over the
    eigenvector, and a central finite difference of the tracked band at
    quasimomenta k +- fd_step along each axis.  Tracking refuses (raises) if
    a shifted eigenvalue moves by more than half the band gap, which would
    make band identity ambiguous.
    """
    if fd_step <= 0.0:
        raise ConfigError(f"finite-difference step must be positive, got {fd_step}")
    constants = constants_for(V, eta)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    sol = _solve_band(V, k, band_target, cutoff)
    _require_zeta(sol.zeta, constants)
    hf = group_velocity(sol)  # raises DegenerateBandError when the gap is too small
    fd = np.empty_like(hf)
    for axis in range(k.size):
        step = np.zeros_like(k)
        step[axis] = fd_step
        shifted = []
        for sign in (+1.0, -1.0):
            nearby = _solve_band(V, k + sign * step, sol.zeta, cutoff)
            if abs(nearby.zeta - sol.zeta) > 0.5 * sol.gap:
                raise TrackingError(
                    f"band tracking lost along axis {axis}: eigenvalue moved "
                    f"{abs(nearby.zeta - sol.zeta):.3e}, more than half the gap "
                    f"{sol.gap:.3e}; retry with a smaller step than {fd_step}"
                )
            shifted.append(nearby.zeta)
        fd[axis] = (shifted[0] - shifted[1]) / (2.0 * fd_step)
    speed_bound = constants.speed_bound(sol.zeta)
    return GradientReport(
        hf_velocity=hf,
        fd_velocity=fd,
        bound_ok=bool(np.linalg.norm(hf) <= speed_bound),
        zeta=sol.zeta,
        gap=sol.gap,
        speed_bound=speed_bound,
        constants=constants,
    )
