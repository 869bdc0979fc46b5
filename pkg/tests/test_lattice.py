import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bloch_dos.errors import ConfigError
from bloch_dos.lattice import (
    DualLattice,
    Lattice,
    brillouin_radius,
    decompose,
    dual_lattice,
    packing_constant_W,
    points_in_ball,
)
from bloch_dos.lattice import _decompose_batch


def lat(basis):
    return Lattice(basis=np.array(basis, dtype=float))


@pytest.fixture(scope="module")
def z2():
    return dual_lattice(lat(2 * np.pi * np.eye(2)))


@pytest.fixture(scope="module")
def z3():
    return dual_lattice(lat(2 * np.pi * np.eye(3)))


@pytest.fixture(scope="module")
def hex_dual():
    return dual_lattice(lat([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]))


class TestDual:
    def test_cube_pairs(self, z2):
        assert np.allclose(z2.basis, np.eye(2), atol=1e-14)
        assert np.isclose(z2.cell_volume, 1.0)

    def test_unit_cube(self):
        D = dual_lattice(lat(np.eye(2)))
        assert np.allclose(D.basis, 2 * np.pi * np.eye(2), atol=1e-12)

    def test_hexagonal_pairing(self, hex_dual):
        gram = hex_dual.basis @ hex_dual.parent.basis.T
        assert np.allclose(gram, 2 * np.pi * np.eye(2), atol=1e-12)

    def test_involution(self, hex_dual):
        back = dual_lattice(hex_dual)
        assert np.allclose(back.basis, hex_dual.parent.basis, atol=1e-12)

    def test_singular_rejected(self):
        with pytest.raises(ConfigError):
            lat([[1.0, 2.0], [2.0, 4.0]])

    def test_dim_one_rejected(self):
        with pytest.raises(ConfigError):
            lat([[3.0]])


class TestDecompose:
    @pytest.mark.parametrize(
        "xi, n, k",
        [
            ((0.6, 0.0), (1, 0), (-0.4, 0.0)),
            ((3.0, -2.0), (3, -2), (0.0, 0.0)),
            ((0.5, 0.0), (0, 0), (0.5, 0.0)),  # boundary tie -> lex smallest
            ((-0.5, 0.0), (-1, 0), (0.5, 0.0)),
            ((0.5, 0.5), (0, 0), (0.5, 0.5)),  # corner tie among four points
        ],
    )
    def test_examples(self, z2, xi, n, k):
        dec = decompose(np.array(xi), z2)
        assert np.array_equal(dec.integer_part, np.array(n, dtype=float))
        assert np.allclose(dec.fractional_part, k, atol=1e-14)
        assert np.array_equal(dec.coords, n)

    def test_reconstruction_bulk(self, z2):
        rng = np.random.default_rng(7)
        Xi = rng.uniform(-50, 50, size=(10000, 2))
        _, n, k = _decompose_batch(Xi, z2)
        assert np.abs(n + k - Xi).max() < 1e-9 * 50
        assert np.linalg.norm(k, axis=1).max() <= brillouin_radius(z2) + 1e-12

    def test_reconstruction_hexagonal(self, hex_dual):
        rng = np.random.default_rng(8)
        Xi = rng.uniform(-40, 40, size=(10000, 2))
        _, n, k = _decompose_batch(Xi, hex_dual)
        assert np.abs(n + k - Xi).max() < 1e-9 * 40
        assert np.linalg.norm(k, axis=1).max() <= brillouin_radius(hex_dual) + 1e-12

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2))
    @settings(max_examples=200, deadline=None)
    def test_voronoi_property(self, xi):
        # |k| <= |k + m| for neighbouring lattice points m
        D = dual_lattice(Lattice(basis=2 * np.pi * np.eye(2)))
        dec = decompose(np.array(xi), D)
        k = dec.fractional_part
        for m in itertools.product((-1, 0, 1), repeat=2):
            if m == (0, 0):
                continue
            assert np.dot(k, k) <= np.dot(k + m, k + m) + 1e-9


class TestBrillouinRadius:
    def test_square(self, z2):
        assert brillouin_radius(z2) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_cube(self, z3):
        assert brillouin_radius(z3) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_hexagonal_closed_form(self, hex_dual):
        # dual is hexagonal with nearest-neighbour distance 4*pi/sqrt(3);
        # the Voronoi cell of a hexagonal lattice is a regular hexagon whose
        # circumradius is that distance divided by sqrt(3)
        assert brillouin_radius(hex_dual) == pytest.approx(4 * math.pi / 3, abs=1e-9)

    def test_hexagonal_sampled_lower_bound(self, hex_dual):
        # coarse dense sample of the cell can only approach Q from below
        rng = np.random.default_rng(3)
        Xi = rng.uniform(-10, 10, size=(200000, 2))
        _, _, k = _decompose_batch(Xi, hex_dual)
        sampled = np.linalg.norm(k, axis=1).max()
        Q = brillouin_radius(hex_dual)
        assert sampled <= Q + 1e-12
        assert sampled > Q - 2e-2

    def test_high_dim_flagged_bound(self):
        D = dual_lattice(lat(2 * np.pi * np.eye(4)))
        with pytest.warns(UserWarning):
            Q = brillouin_radius(D)
        assert Q >= 1.0  # true value for Z^4 is 1; bound must not undershoot


class TestPointsInBall:
    def test_examples(self, z2):
        assert len(points_in_ball(z2, 1.0, exclude_origin=True)) == 4
        assert len(points_in_ball(z2, 1.5)) == 9
        assert len(points_in_ball(z2, 2.0)) == 13

    def test_against_brute_scan(self, z2):
        # independent oracle: scan the integer box [-3,3]^2 directly
        for r in (0.5, 1.0, 1.7, 2.0, 2.5, 3.0):
            brute = {
                (i, j)
                for i in range(-3, 4)
                for j in range(-3, 4)
                if i * i + j * j <= r * r * (1 + 1e-12)
            }
            got = {tuple(int(round(c)) for c in p) for p in points_in_ball(z2, r)}
            assert got == brute

    def test_ordering(self, z2):
        pts = points_in_ball(z2, 2.0)
        norms = np.linalg.norm(pts, axis=1)
        assert np.all(np.diff(norms) > -1e-12)
        assert np.array_equal(pts[0], [0.0, 0.0])

    @given(st.floats(0.0, 6.0), st.floats(0.0, 6.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, r1, r2):
        D = dual_lattice(Lattice(basis=2 * np.pi * np.eye(2)))
        lo, hi = sorted((r1, r2))
        small = {tuple(p) for p in points_in_ball(D, lo)}
        large = {tuple(p) for p in points_in_ball(D, hi)}
        assert small <= large

    def test_negative_radius_rejected(self, z2):
        with pytest.raises(ConfigError):
            points_in_ball(z2, -0.1)


def brute_packing_sup(pts, d, r_max):
    """Independent oracle: evaluate count/r^d at every jump radius directly."""
    norms = np.sort(np.linalg.norm(pts, axis=1))
    best = float(np.searchsorted(norms, 1.0 + 1e-9, side="right"))
    for r in np.unique(norms[norms > 1.0 + 1e-9]):
        if r > r_max:
            break
        best = max(best, np.searchsorted(norms, r + 1e-9, side="right") / r**d)
    return best


class TestPackingConstant:
    def test_square(self, z2):
        W = packing_constant_W(z2)
        assert W == pytest.approx(5.0, abs=1e-12)
        assert W == pytest.approx(brute_packing_sup(points_in_ball(z2, 60.0), 2, 50.0))

    def test_cube(self, z3):
        assert packing_constant_W(z3) == pytest.approx(7.0, abs=1e-12)

    def test_scaled_square(self):
        # dual of (pi Z)^2 is (2Z)^2: five points at r=2 give the sup 5/4.
        D = dual_lattice(lat(np.pi * np.eye(2)))
        W = packing_constant_W(D)
        assert W == pytest.approx(1.25, abs=1e-12)
        assert W == pytest.approx(brute_packing_sup(points_in_ball(D, 120.0), 2, 100.0))

    def test_density_lower_bound(self, z2, z3, hex_dual):
        for D in (z2, z3, hex_dual):
            d = D.dim
            dens = math.pi ** (d / 2) / math.gamma(d / 2 + 1) / D.cell_volume
            assert packing_constant_W(D) >= dens - 1e-12
