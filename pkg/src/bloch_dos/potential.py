"""Trigonometric-polynomial potentials stored by Fourier coefficients.

A potential is a finite set of Fourier coefficients V_n attached to dual
lattice points n, under the normalization

    V(x) = (vol Omega)^(-1/2) * sum_n V_n exp(i <n, x>),

where vol Omega is the volume of the primal fundamental cell.  Real-valued
potentials are enforced through the Hermitian symmetry V_{-n} = conj(V_n).

Coefficients are keyed by integer coordinate tuples in the dual basis; the
Cartesian dual points are derived from the lattice.  Finite support keeps all
seminorms exact, keeps fibre matrices sparse, and makes the decay-bound
constants computable in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lattice import DualLattice

__all__ = ["PotentialSpec", "SupNormBracket", "evaluate", "sup_norm", "sobolev_seminorm"]


@dataclass(frozen=True)
class SupNormBracket:
    """Two-sided report on the sup norm: grid maximum below, coefficient sum above."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lower <= self.upper * (1.0 + 1e-12) + 1e-15):
            raise ConfigError(f"invalid sup-norm bracket ({self.lower}, {self.upper})")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Finitely supported Fourier coefficients of a real periodic potential.

    ``coeffs`` maps integer coordinate tuples (in the dual basis) to complex
    coefficients.  The zero mode is always stored, defaulting to 0.
    """

    lattice: DualLattice
    coeffs: dict[tuple[int, ...], complex]
    cell_volume: float = field(init=False)

    def __post_init__(self) -> None:
        d = self.lattice.dim
        clean: dict[tuple[int, ...], complex] = {}
        for key, val in self.coeffs.items():
            tup = tuple(int(c) for c in key)
            if len(tup) != d:
                raise ConfigError(f"coefficient index {key} has wrong length for d={d}")
            if tup in clean:
                raise ConfigError(f"duplicate coefficient index {tup}")
            clean[tup] = complex(val)
        clean.setdefault((0,) * d, 0.0 + 0.0j)
        scale = max((abs(v) for v in clean.values()), default=0.0)
        for tup, val in clean.items():
            neg = tuple(-c for c in tup)
            partner = clean.get(neg)
            if partner is None or abs(partner - val.conjugate()) > 1e-12 * max(scale, 1.0):
                raise ConfigError(
                    f"Hermitian symmetry violated at n={tup}: need V_-n = conj(V_n)"
                )
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(
            self, "cell_volume", (2.0 * math.pi) ** d / self.lattice.cell_volume
        )
        coords = np.array(sorted(clean.keys()), dtype=np.int64).reshape(len(clean), d)
        values = np.array([clean[tuple(c)] for c in coords], dtype=complex)
        points = coords @ self.lattice.basis
        object.__setattr__(self, "_coords", coords)
        object.__setattr__(self, "_values", values)
        object.__setattr__(self, "_points", points)
        object.__setattr__(self, "_all_real", bool(np.all(values.imag == 0.0)))

    @classmethod
    def from_records(cls, lattice: DualLattice, records: list[dict]) -> "PotentialSpec":
        """Build from config records {"n": [ints], "re": float, "im": float}."""
        coeffs: dict[tuple[int, ...], complex] = {}
        for rec in records:
            tup = tuple(int(c) for c in rec["n"])
            if tup in coeffs:
                raise ConfigError(f"duplicate coefficient record for n={tup}")
            coeffs[tup] = complex(float(rec["re"]), float(rec.get("im", 0.0)))
        return cls(lattice=lattice, coeffs=coeffs)

    @property
    def support_coords(self) -> np.ndarray:
        return self._coords

    @property
    def support_points(self) -> np.ndarray:
        return self._points

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def is_real_coupled(self) -> bool:
        """True when all coefficients are real, allowing real symmetric fibres."""
        return self._all_real

    @property
    def coefficient_sum_bound(self) -> float:
        """(vol Omega)^(-1/2) * sum |V_n|, an exact upper bound for sup|V|."""
        return float(np.abs(self._values).sum() / math.sqrt(self.cell_volume))


def _evaluate_many(V: PotentialSpec, X: np.ndarray) -> np.ndarray:
    phases = X @ V.support_points.T
    vals = np.exp(1j * phases) @ V.values / math.sqrt(V.cell_volume)
    residue = float(np.abs(vals.imag).max(initial=0.0))
    if residue > 1e-10 * max(1.0, V.coefficient_sum_bound):
        raise ConfigError(f"potential evaluates with imaginary residue {residue:.3e}")
    return vals.real


def evaluate(V: PotentialSpec, x: np.ndarray) -> float:
    """Value of the potential at x; the imaginary residue must be negligible."""
    x = np.asarray(x, dtype=float)
    if x.shape != (V.lattice.dim,):
        raise ConfigError(f"x must be a vector of length {V.lattice.dim}")
    return float(_evaluate_many(V, x[None, :])[0])


def sup_norm(V: PotentialSpec, grid_per_dim: int = 32) -> SupNormBracket:
    """Bracket max|V|: grid maximum over the primal cell, coefficient-sum bound.

    The lower edge converges upward under grid refinement; consumers that need
    a safe overestimate (shell widths, cutoff suggestions) use ``upper``.
    """
    if grid_per_dim < 8:
        raise ConfigError(f"grid_per_dim must be at least 8, got {grid_per_dim}")
    d = V.lattice.dim
    primal = V.lattice.parent.basis
    t = np.arange(grid_per_dim) / grid_per_dim
    grids = np.meshgrid(*([t] * d), indexing="ij")
    frac = np.stack([g.ravel() for g in grids], axis=1)
    X = frac @ primal
    lower = float(np.abs(_evaluate_many(V, X)).max(initial=0.0))
    return SupNormBracket(lower=lower, upper=V.coefficient_sum_bound)


def sobolev_seminorm(V: PotentialSpec, m: float) -> float:
    """(sum_n |n|^{2m} |V_n|^2)^{1/2} over the finite support; exact."""
    if m < 0:
        raise ConfigError(f"seminorm order must be nonnegative, got {m}")
    r2 = np.einsum("ij,ij->i", V.support_points, V.support_points)
    weights = np.power(r2, float(m))  # 0^0 = 1 covers the zero mode at m = 0
    return float(math.sqrt(np.sum(weights * np.abs(V.values) ** 2)))
