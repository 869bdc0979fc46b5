"""Truncated plane-wave fibre matrices and their spectral routines.

For a wave vector k the fibre operator acts on Fourier coefficients by

    (H(k) psi)_n = |n + k|^2 psi_n + (vol Omega)^(-1/2) sum_l V_{n-l} psi_l,

restricted here to the plane-wave basis {n : |n + k| <= cutoff}.  The
convolution factor (vol Omega)^(-1/2) follows from the stored Fourier
normalization of the potential; conventions that fold the factor into the
coefficients can be reproduced with ``scale_by_cell_volume=False``.

Eigenvalue counting uses the inertia of a symmetric-indefinite banded
factorization (counts of negative pivots of A - lambda*I), which is what an
integrated-density-of-states quadrature needs at thousands of k-points.  Full
dense diagonalization and targeted shift-invert iteration cover the remaining
use cases (band structure, single high-energy eigenpairs).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import DegenerateBandError, PreconditionError, SolverError
from .lattice import DualLattice
from .potential import PotentialSpec

__all__ = [
    "PlaneWaveBasis",
    "FibreMatrix",
    "BandSolution",
    "plane_wave_basis",
    "assemble",
    "solve_dense",
    "count_below",
    "eigenpair_near",
    "group_velocity",
    "suggest_cutoff",
]

logger = logging.getLogger(__name__)

DENSE_THRESHOLD = 2000
DENSE_FALLBACK_LIMIT = 4000
GAP_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """Ordered dual points n with |n + k| <= cutoff.

    Ordering is by |n + k|, ties broken lexicographically on n, so the basis
    is a deterministic function of (lattice, k, cutoff).
    """

    k: np.ndarray
    cutoff: float
    indices: np.ndarray  # (N, d) dual points n
    coords: np.ndarray  # (N, d) integer coordinates of n in the dual basis
    shifted: np.ndarray = field(init=False)  # (N, d) vectors n + k

    def __post_init__(self) -> None:
        object.__setattr__(self, "shifted", self.indices + self.k)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.indices.shape[1]


def plane_wave_basis(D: DualLattice, k: np.ndarray, cutoff: float) -> PlaneWaveBasis:
    k = np.asarray(k, dtype=float)
    if cutoff <= 0:
        raise PreconditionError(f"cutoff must be positive, got {cutoff}")
    if k.shape != (D.dim,):
        raise PreconditionError(f"k must be a vector of length {D.dim}")
    inv = np.linalg.inv(D.basis)
    reach = (cutoff + float(np.linalg.norm(k))) * (1.0 + 1e-12)
    bounds = np.floor(reach * np.linalg.norm(inv, axis=0) + 1e-9).astype(int)
    if np.prod(2.0 * bounds.astype(float) + 1.0) > 4e7:
        raise SolverError(f"plane_wave_basis: enumeration box too large for cutoff={cutoff}")
    axes = [np.arange(-int(m), int(m) + 1) for m in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    pts = coords @ D.basis
    sh = pts + k
    r2 = np.einsum("ij,ij->i", sh, sh)
    keep = r2 <= (cutoff * (1.0 + 1e-12) + 1e-15) ** 2
    coords, pts, r2 = coords[keep], pts[keep], r2[keep]
    if len(coords) == 0:
        raise PreconditionError(f"empty plane-wave basis at k={k}, cutoff={cutoff}")
    order = np.lexsort(tuple(pts[:, j] for j in range(pts.shape[1] - 1, -1, -1)) + (r2,))
    return PlaneWaveBasis(k=k, cutoff=float(cutoff), indices=pts[order], coords=coords[order])


class _PivotBreakdown(Exception):
    pass


@dataclass(eq=False)
class _BandedForm:
    """Lower band storage of the symmetric matrix in coordinate-sorted order."""

    perm: np.ndarray
    bandwidth: int
    ab: np.ndarray  # (bandwidth+1, N+bandwidth), column j holds A[j:j+w+1, j]
    scale: float


@dataclass(frozen=True, eq=False)
class FibreMatrix:
    """Hermitian fibre matrix: diagonal |n+k|^2 + c0, convolution off-diagonals.

    Off-diagonal entries are stored once as an upper-triangle coordinate list;
    a dense copy is kept only when the basis is small enough for direct
    factorizations to be the cheaper option.
    """

    basis: PlaneWaveBasis
    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    dense: np.ndarray | None

    def __post_init__(self) -> None:
        object.__setattr__(self, "_cache", {})

    @property
    def n(self) -> int:
        return self.basis.size

    @property
    def storage(self) -> str:
        return "dense" if self.dense is not None else "sparse"

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.vals)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        dtype = float if self.is_real else complex
        A = np.zeros((self.n, self.n), dtype=dtype)
        A[self.rows, self.cols] = self.vals
        A += A.conj().T
        A[np.diag_indices(self.n)] = self.diag
        return A

    def to_sparse(self) -> scipy.sparse.csc_matrix:
        key = "csc"
        if key not in self._cache:
            n = self.n
            rows = np.concatenate([self.rows, self.cols, np.arange(n)])
            cols = np.concatenate([self.cols, self.rows, np.arange(n)])
            vals = np.concatenate([self.vals, self.vals.conj(), self.diag.astype(self.vals.dtype)])
            self._cache[key] = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
        return self._cache[key]

    def banded_form(self) -> _BandedForm:
        key = "banded"
        if key not in self._cache:
            self._cache[key] = _build_banded(self)
        return self._cache[key]


def assemble(
    V: PotentialSpec,
    k: np.ndarray,
    cutoff: float,
    *,
    scale_by_cell_volume: bool = True,
    dense_threshold: int = DENSE_THRESHOLD,
) -> FibreMatrix:
    """Fibre matrix on the plane-wave basis at k with the given cutoff.

    ``scale_by_cell_volume=False`` drops the (vol Omega)^(-1/2) convolution
    factor, reproducing conventions where it is folded into the coefficients.
    """
    basis = plane_wave_basis(V.lattice, k, cutoff)
    d = V.lattice.dim
    weight = 1.0 / math.sqrt(V.cell_volume) if scale_by_cell_volume else 1.0
    zero = (0,) * d
    c0 = (weight * V.coeffs[zero]).real
    sh = basis.shifted
    diag = np.einsum("ij,ij->i", sh, sh) + c0

    # integer encoding of basis coordinates for vectorized index lookup
    coords = basis.coords
    support = [(np.asarray(s), V.coeffs[s]) for s in sorted(V.coeffs) if s != zero]
    span = max((int(np.abs(s).max()) for s, _ in support), default=0)
    lo = coords.min(axis=0) - span
    extent = coords.max(axis=0) + span - lo + 1
    strides = np.cumprod(np.concatenate(([1], extent[:-1].astype(np.int64))))

    def encode(c):
        return (c - lo) @ strides

    keys = encode(coords)
    order = np.argsort(keys)
    sorted_keys = keys[order]

    rows_acc, cols_acc, vals_acc = [], [], []
    for s, coeff in support:
        target = encode(coords + s)
        pos = np.searchsorted(sorted_keys, target)
        pos_clip = np.minimum(pos, len(sorted_keys) - 1)
        hit = sorted_keys[pos_clip] == target
        j = np.nonzero(hit)[0]
        i = order[pos_clip[hit]]
        keep = i < j  # store each unordered pair once; the mirror comes from -s
        rows_acc.append(i[keep])
        cols_acc.append(j[keep])
        vals_acc.append(np.full(int(keep.sum()), weight * coeff))

    if rows_acc:
        rows = np.concatenate(rows_acc)
        cols = np.concatenate(cols_acc)
        vals = np.concatenate(vals_acc)
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=complex)
    if V.is_real_coupled:
        vals = vals.real
    if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(diag)):
        raise SolverError("assemble produced non-finite entries")

    dense = None
    if basis.size <= dense_threshold:
        A = np.zeros((basis.size, basis.size), dtype=vals.dtype)
        A[rows, cols] = vals
        A = A + A.conj().T
        A[np.diag_indices(basis.size)] = diag
        dense = A
    return FibreMatrix(basis=basis, diag=diag, rows=rows, cols=cols, vals=vals, dense=dense)


def _build_banded(A: FibreMatrix) -> _BandedForm:
    coords = A.basis.coords
    d = coords.shape[1]
    perm = np.lexsort(tuple(coords[:, j] for j in range(d - 1, -1, -1)))
    inv_perm = np.empty_like(perm)
    inv_perm[perm] = np.arange(len(perm))
    pi = inv_perm[A.rows]
    pj = inv_perm[A.cols]
    # flip entries into the lower triangle of the permuted matrix
    flip = pi < pj
    vals = np.where(flip, A.vals.conj(), A.vals)
    lower_i = np.where(flip, pj, pi)
    lower_j = np.where(flip, pi, pj)
    w = int((lower_i - lower_j).max(initial=0))
    n = A.n
    if (w + 1) * (n + w) > 3e8:
        raise SolverError(f"banded factorization would need bandwidth {w} at size {n}")
    dtype = float if A.is_real else complex
    ab = np.zeros((w + 1, n + w), dtype=dtype)
    ab[0, :n] = A.diag[perm]
    ab[lower_i - lower_j, lower_j] = vals
    scale = max(
        1.0,
        float(np.abs(A.diag).max(initial=0.0)),
        float(np.abs(A.vals).max(initial=0.0)),
    )
    return _BandedForm(perm=perm, bandwidth=w, ab=ab, scale=scale)


def _banded_negative_inertia(bf: _BandedForm, lam: float) -> int:
    """Negative pivots of the LDL^* factorization of A - lam*I.

    Sliding-window elimination: only the active (w+1) x (w+1) block is kept.
    Raises _PivotBreakdown on a tiny pivot or runaway element growth, which
    the caller handles by perturbing lam.
    """
    w = bf.bandwidth
    n = bf.ab.shape[1] - w
    tiny = 1e-14 * bf.scale
    growth_limit = 1e13 * bf.scale
    if w == 0:
        dvec = bf.ab[0, :n].real - lam
        if np.any(np.abs(dvec) < tiny):
            raise _PivotBreakdown
        return int(np.count_nonzero(dvec < 0.0))
    ab = bf.ab
    m = w + 1
    W = np.zeros((m, m), dtype=ab.dtype)
    for b in range(m):
        W[b:, b] = ab[: m - b, b]
    W = W + np.tril(W, -1).conj().T
    W[np.diag_indices(m)] -= lam
    rowidx = np.arange(w, -1, -1)
    colbase = 1 + np.arange(m)
    neg = 0
    for j in range(n):
        dpiv = W[0, 0].real
        adp = abs(dpiv)
        if adp < tiny:
            raise _PivotBreakdown
        if dpiv < 0.0:
            neg += 1
        if j == n - 1:
            break
        c = W[1:, 0]
        g = float(np.abs(c).max(initial=0.0))
        if g * g > growth_limit * adp:
            raise _PivotBreakdown
        T = W[1:, 1:] - np.outer(c, c.conj()) / dpiv
        W[:w, :w] = T
        newrow = ab[rowidx, j + colbase]
        W[w, :w] = newrow[:w]
        W[:w, w] = newrow[:w].conj()
        W[w, w] = newrow[w].real - lam
    return neg


def _dense_inertia(A: FibreMatrix, lam: float) -> int:
    """Negative inertia via a blocked LDL^* factorization with pivoting."""
    M = A.to_dense().astype(complex if not A.is_real else float)
    M = M - lam * np.eye(A.n)
    _, dblock, _ = scipy.linalg.ldl(M, lower=True)
    neg = 0
    i = 0
    n = A.n
    while i < n:
        if i + 1 < n and dblock[i + 1, i] != 0:
            ev = np.linalg.eigvalsh(dblock[i : i + 2, i : i + 2])
            neg += int(np.count_nonzero(ev < 0.0))
            i += 2
        else:
            if dblock[i, i].real < 0.0:
                neg += 1
            i += 1
    return neg


def count_below(A: FibreMatrix, lam: float, method: str = "auto") -> int:
    """Number of eigenvalues of A strictly below lam.

    The default path factorizes A - lam*I in band form and counts negative
    pivots (Sylvester inertia).  A lam that collides with an eigenvalue of a
    leading submatrix breaks the factorization; such lam are retried with a
    small upward perturbation, and as a last resort the count falls back to a
    pivoted dense factorization.  method="dense" instead counts eigenvalues
    from a full diagonalization, as an independent cross-check.
    """
    if method not in ("auto", "inertia", "dense"):
        raise PreconditionError(f"unknown counting method {method!r}")
    lam = float(lam)
    if method == "dense":
        if A.n > DENSE_FALLBACK_LIMIT:
            raise PreconditionError(f"dense counting limited to size {DENSE_FALLBACK_LIMIT}")
        evals = np.linalg.eigvalsh(A.to_dense())
        lam_eff = lam
        if np.any(np.abs(evals - lam) <= 1e-12 * (1.0 + abs(lam))):
            # same tie resolution as the inertia path: nudge lam upward
            lam_eff = lam + 1e-9 * (1.0 + abs(lam))
            logger.info("count_below: lambda=%r collides with an eigenvalue", lam)
        return int(np.count_nonzero(evals < lam_eff))
    bf = A.banded_form()
    shift = 1e-9 * (1.0 + abs(lam))
    for attempt in range(4):
        lam_try = lam + shift * (10.0 ** (attempt - 1)) * (attempt > 0)
        try:
            return _banded_negative_inertia(bf, lam_try)
        except _PivotBreakdown:
            # expected when lam collides with an eigenvalue; resolved upward
            logger.info(
                "count_below: factorization breakdown n=%d lambda=%.17g attempt=%d",
                A.n,
                lam_try,
                attempt,
            )
    if A.n <= DENSE_FALLBACK_LIMIT:
        logger.warning("count_below: falling back to pivoted dense factorization n=%d", A.n)
        return _dense_inertia(A, lam + shift)
    raise SolverError(f"count_below failed at lambda={lam} after perturbed retries")


def _phase_fix(vec: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(vec)))
    pivot = vec[j]
    if pivot == 0:
        return vec
    return vec * (abs(pivot) / pivot)


@dataclass(frozen=True, eq=False)
class BandSolution:
    """One eigenpair of a fibre matrix with quality metadata."""

    zeta: float
    vector: np.ndarray
    basis: PlaneWaveBasis
    gap: float
    residual: float
    near_degenerate: bool = False

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-10:
            raise SolverError(f"eigenvector norm {norm} departs from 1")

    @property
    def coeffs(self) -> dict[tuple[int, ...], complex]:
        return {
            tuple(int(c) for c in crd): complex(v)
            for crd, v in zip(self.basis.coords, self.vector)
        }


def solve_dense(A: FibreMatrix, residual_tol: float = 1e-10) -> list[BandSolution]:
    """All eigenpairs in ascending order via full Hermitian diagonalization."""
    if A.dense is None and A.n > DENSE_FALLBACK_LIMIT:
        raise PreconditionError(
            f"solve_dense limited to dense storage or size {DENSE_FALLBACK_LIMIT}"
        )
    M = A.to_dense()
    evals, vecs = np.linalg.eigh(M)
    resid = np.linalg.norm(M @ vecs - vecs * evals, axis=0)
    bad = resid > residual_tol * (1.0 + np.abs(evals))
    if np.any(bad):
        worst = int(np.argmax(resid / (1.0 + np.abs(evals))))
        raise SolverError(
            f"dense solve residual {resid[worst]:.3e} at zeta={evals[worst]:.6g} "
            f"exceeds tolerance"
        )
    sols = []
    n = A.n
    for j in range(n):
        if n == 1:
            gap = math.inf
        elif j == 0:
            gap = float(evals[1] - evals[0])
        elif j == n - 1:
            gap = float(evals[-1] - evals[-2])
        else:
            gap = float(min(evals[j] - evals[j - 1], evals[j + 1] - evals[j]))
        sols.append(
            BandSolution(
                zeta=float(evals[j]),
                vector=_phase_fix(vecs[:, j]),
                basis=A.basis,
                gap=gap,
                residual=float(resid[j]),
                near_degenerate=gap < GAP_RTOL * (1.0 + abs(evals[j])),
            )
        )
    return sols


def eigenpair_near(
    A: FibreMatrix,
    target: float,
    *,
    n_extra: int = 5,
    seed: int = 7,
    maxiter: int | None = None,
) -> BandSolution:
    """Eigenpair with eigenvalue nearest to target, by shift-invert iteration.

    The gap field is filled from the next-nearest converged eigenvalue.  A gap
    below the relative simplicity threshold flags the solution as
    near-degenerate rather than raising.
    """
    n = A.n
    if n <= 16:
        sols = solve_dense(A)
        j = int(np.argmin([abs(s.zeta - target) for s in sols]))
        return sols[j]
    k_eigs = max(2, min(1 + n_extra, n - 1))
    M = A.to_sparse()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if not A.is_real:
        v0 = v0 + 1j * rng.standard_normal(n)
    sigma = float(target)
    last_err: Exception | None = None
    for attempt in range(3):
        try:
            evals, vecs = scipy.sparse.linalg.eigsh(
                M, k=k_eigs, sigma=sigma, v0=v0, maxiter=maxiter
            )
            break
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            raise SolverError(f"shift-invert iteration did not converge at target {target}") from err
        except RuntimeError as err:
            # singular shift: target sits on an eigenvalue of the factorization
            last_err = err
            sigma += 1e-9 * (1.0 + abs(sigma)) * 10.0**attempt
            logger.warning("eigenpair_near: singular shift, retrying at sigma=%.17g", sigma)
    else:
        raise SolverError(f"shift-invert factorization failed near {target}: {last_err}")
    order = np.argsort(np.abs(evals - target))
    zeta = float(evals[order[0]])
    vec = vecs[:, order[0]]
    vec = _phase_fix(vec / np.linalg.norm(vec))
    gap = float(abs(evals[order[1]] - zeta)) if len(evals) > 1 else math.inf
    resid = float(np.linalg.norm(M @ vec - zeta * vec))
    if resid > 1e-9 * (1.0 + abs(zeta)):
        raise SolverError(f"eigenpair residual {resid:.3e} too large at zeta={zeta:.6g}")
    return BandSolution(
        zeta=zeta,
        vector=vec,
        basis=A.basis,
        gap=gap,
        residual=resid,
        near_degenerate=gap < GAP_RTOL * (1.0 + abs(zeta)),
    )


def group_velocity(
    sol: BandSolution,
    basis: PlaneWaveBasis | None = None,
    *,
    gap_rtol: float = GAP_RTOL,
) -> np.ndarray:
    """Gradient of a simple band: 2 * sum_n (n + k) |psi_n|^2 (Hellmann-Feynman)."""
    basis = basis if basis is not None else sol.basis
    if basis is not sol.basis and (
        basis.size != sol.basis.size or not np.array_equal(basis.coords, sol.basis.coords)
    ):
        raise PreconditionError("basis does not match the one the solution was computed in")
    if sol.gap < gap_rtol * (1.0 + abs(sol.zeta)):
        raise DegenerateBandError(
            f"band at zeta={sol.zeta:.6g} has gap {sol.gap:.3e}, below simplicity threshold"
        )
    weights = np.abs(sol.vector) ** 2
    return 2.0 * np.einsum("i,ij->j", weights, basis.shifted)


def suggest_cutoff(lambda_max: float, v_upper: float, buffer: float) -> float:
    """Basis radius covering the spectral shell: sqrt(lambda_max + 40 v) + buffer."""
    if lambda_max <= 0:
        raise PreconditionError(f"lambda_max must be positive, got {lambda_max}")
    if v_upper < 0 or buffer < 0:
        raise PreconditionError("v_upper and buffer must be nonnegative")
    return math.sqrt(lambda_max + 40.0 * v_upper) + buffer
