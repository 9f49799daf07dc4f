import math

import numpy as np
import pytest

from hrsolve.grid import (
    Field,
    constant_field,
    h1_seminorm,
    inner,
    laplacian_neumann,
    make_grid,
    mean,
    norm_lp,
    read_field,
    shift_field,
    write_field,
)


def random_field(dom, rng):
    return Field(dom, rng.uniform(-1.0, 1.0, dom.counts))


GRIDS = {
    1: make_grid(1, [1.7], [33]),
    2: make_grid(2, [1.3, 0.8], [12, 9]),
    3: make_grid(3, [1.0, 0.9, 1.4], [7, 6, 5]),
}


class TestMakeGrid:
    def test_1d_quarter_spacing(self):
        dom = make_grid(1, [1.0], [4])
        assert dom.spacing == (0.25,)
        assert dom.volume == 1.0

    def test_3d_unit_cube(self):
        dom = make_grid(3, [1, 1, 1], [16, 16, 16])
        assert dom.volume == 1.0
        assert dom.ncells == 4096

    def test_list_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths"):
            make_grid(2, [1.0], [16, 16])

    def test_nonpositive_extent(self):
        with pytest.raises(ValueError, match="positive"):
            make_grid(1, [0.0], [4])

    def test_count_below_two(self):
        with pytest.raises(ValueError, match="at least 2"):
            make_grid(1, [1.0], [1])

    def test_bad_dim(self):
        with pytest.raises(ValueError, match="dim"):
            make_grid(4, [1, 1, 1, 1], [4, 4, 4, 4])

    def test_spacing_times_counts_reproduces_lengths(self):
        dom = GRIDS[3]
        for h, n, L in zip(dom.spacing, dom.counts, dom.lengths):
            assert h * n == pytest.approx(L, rel=1e-15)


class TestLaplacian:
    def test_annihilates_constants(self):
        dom = GRIDS[2]
        out = laplacian_neumann(dom, constant_field(dom, 3.7))
        assert np.all(out.values == 0.0)

    def test_1d_hand_stencil(self):
        # mirror ghosts: at the left end (f1 - f0)/h^2, interior standard
        dom = make_grid(1, [4.0], [4])
        f = Field(dom, np.array([1.0, 2.0, 3.0, 4.0]))
        out = laplacian_neumann(dom, f)
        assert out.values == pytest.approx([1.0, 0.0, 0.0, -1.0], abs=0)

    def test_domain_mismatch(self):
        f = Field(GRIDS[1], np.zeros(33))
        with pytest.raises(ValueError, match="domain"):
            laplacian_neumann(make_grid(1, [1.0], [33]), f)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_discrete_divergence_theorem(self, dim):
        dom = GRIDS[dim]
        rng = np.random.default_rng(dim)
        for _ in range(10):
            f = random_field(dom, rng)
            total = laplacian_neumann(dom, f).values.sum() * dom.cell_volume
            assert abs(total) < 1e-10

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_symmetry_and_negative_semidefinite(self, dim):
        dom = GRIDS[dim]
        rng = np.random.default_rng(10 + dim)
        for _ in range(10):
            f, g = random_field(dom, rng), random_field(dom, rng)
            lf, lg = laplacian_neumann(dom, f), laplacian_neumann(dom, g)
            a, b = inner(dom, lf, g), inner(dom, f, lg)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))
            quad = inner(dom, lf, f)
            nrm = norm_lp(dom, f, 2)
            assert quad <= 1e-12 * nrm**2

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_zero_row_sum(self, dim):
        dom = GRIDS[dim]
        rng = np.random.default_rng(20 + dim)
        for _ in range(10):
            f = random_field(dom, rng)
            assert abs(laplacian_neumann(dom, f).values.sum()) <= 1e-10 * norm_lp(dom, f, 2)

    def test_matches_h1_by_parts(self):
        # summation by parts: <lap f, f> == -|grad f|^2 exactly for this stencil
        dom = GRIDS[2]
        rng = np.random.default_rng(3)
        f = random_field(dom, rng)
        lhs = inner(dom, laplacian_neumann(dom, f), f)
        assert lhs == pytest.approx(-h1_seminorm(dom, f) ** 2, rel=1e-12)


class TestNorms:
    def test_constant_lp(self):
        dom = make_grid(2, [1.0, 1.0], [8, 8])
        f = constant_field(dom, 2.0)
        assert norm_lp(dom, f, 2) == pytest.approx(2.0, rel=1e-14)
        assert norm_lp(dom, f, 4) == pytest.approx(2.0, rel=1e-14)

    def test_linf_of_negative(self):
        dom = GRIDS[1]
        assert norm_lp(dom, constant_field(dom, -3.0), math.inf) == 3.0

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError, match="p >= 1"):
            norm_lp(GRIDS[1], constant_field(GRIDS[1], 1.0), 0.5)

    def test_monotone_in_p_on_unit_volume(self):
        dom = make_grid(2, [1.0, 1.0], [16, 16])
        rng = np.random.default_rng(4)
        for _ in range(5):
            f = random_field(dom, rng)
            norms = [norm_lp(dom, f, p) for p in (2, 4, 6, math.inf)]
            assert norms == sorted(norms)

    def test_h1_constant_is_zero(self):
        assert h1_seminorm(GRIDS[3], constant_field(GRIDS[3], 5.0)) == 0.0

    def test_h1_linear_ramp(self):
        # three interior faces of slope 1, face weight h: sqrt(3 * 0.25)
        dom = make_grid(1, [1.0], [4])
        f = Field(dom, np.array([0.0, 0.25, 0.5, 0.75]))
        assert h1_seminorm(dom, f) == pytest.approx(math.sqrt(0.75), rel=1e-14)

    def test_h1_homogeneity(self):
        dom = GRIDS[2]
        rng = np.random.default_rng(5)
        f = random_field(dom, rng)
        c = -2.75
        scaled = Field(dom, c * f.values)
        assert h1_seminorm(dom, scaled) == pytest.approx(abs(c) * h1_seminorm(dom, f), rel=1e-13)


class TestShiftAndMean:
    def test_zero_shift_identity(self):
        dom = GRIDS[2]
        rng = np.random.default_rng(6)
        f = random_field(dom, rng)
        out = shift_field(dom, f, (0.0, 0.0))
        assert np.array_equal(out.values, f.values)

    def test_1d_unit_cell_shift(self):
        dom = make_grid(1, [1.0], [4])
        f = Field(dom, np.array([1.0, 2.0, 3.0, 4.0]))
        out = shift_field(dom, f, (0.25,))
        assert np.array_equal(out.values, [2.0, 3.0, 4.0, 0.0])
        assert out.meta["shift_offset"] == (0.25,)

    def test_full_eviction(self):
        dom = make_grid(1, [1.0], [4])
        f = Field(dom, np.arange(4.0) + 1)
        assert np.all(shift_field(dom, f, (1.0,)).values == 0.0)
        assert np.all(shift_field(dom, f, (-1.0,)).values == 0.0)

    def test_snapping_to_nearest_cell(self):
        dom = make_grid(1, [1.0], [4])
        f = Field(dom, np.arange(4.0))
        out = shift_field(dom, f, (0.26,))
        assert out.meta["shift_offset"] == (0.25,)

    def test_round_trip_interior(self):
        dom = make_grid(1, [1.0], [8])
        rng = np.random.default_rng(7)
        f = random_field(dom, rng)
        back = shift_field(dom, shift_field(dom, f, (0.25,)), (-0.25,))
        assert np.array_equal(back.values[2:], f.values[2:])

    def test_mean(self):
        dom = make_grid(1, [1.0], [2])
        assert mean(dom, constant_field(dom, 5.0)) == 5.0
        assert mean(dom, Field(dom, np.array([1.0, 3.0]))) == 2.0

    def test_mean_invariant_under_zero_shift(self):
        dom = GRIDS[1]
        f = random_field(dom, np.random.default_rng(8))
        assert mean(dom, shift_field(dom, f, (0.0,))) == mean(dom, f)


class TestFieldIO:
    def test_bit_exact_round_trip(self, tmp_path):
        dom = make_grid(2, [1.0, 2.0], [5, 7])
        rng = np.random.default_rng(9)
        f = Field(dom, rng.standard_normal(dom.counts) * 1e-12)
        f.values[0, 0] = -0.0
        path = tmp_path / "snap_u.hrfield"
        write_field(path, f, "u", 0.125)
        g, comp, t = read_field(path, dom)
        assert comp == "u" and t == 0.125
        assert np.array_equal(g.values, f.values)
        assert np.signbit(g.values[0, 0])

    def test_header_layout(self, tmp_path):
        dom = make_grid(1, [1.0], [3])
        path = tmp_path / "f.hrfield"
        write_field(path, Field(dom, np.zeros(3)), "w", 2.5)
        header = path.read_bytes().split(b"\n", 1)[0]
        assert header == b"HRFIELD 1 3 w 2.5"

    def test_count_mismatch_rejected(self, tmp_path):
        dom = make_grid(1, [1.0], [3])
        path = tmp_path / "f.hrfield"
        write_field(path, Field(dom, np.zeros(3)), "v", 0.0)
        with pytest.raises(ValueError, match="domain"):
            read_field(path, make_grid(1, [1.0], [4]))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOTAFIELD 1 3 u 0\n" + b"\0" * 24)
        with pytest.raises(ValueError, match="HRFIELD"):
            read_field(path, make_grid(1, [1.0], [3]))

    def test_field_size_validation(self):
        with pytest.raises(ValueError, match="cells"):
            Field(GRIDS[1], np.zeros(7))
