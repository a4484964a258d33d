"""Basin grids, the separatrix agreement and the unstable limit cycle."""

from __future__ import annotations

import numpy as np
import pytest

from htallee.basins import (
    BasinGrid,
    NoCycleError,
    basin_area_fraction,
    boundary_distance,
    compute_basins,
    cycle_sandwich,
    densify,
    extract_unstable_cycle,
    label_boundary,
)
from htallee.equilibria import hopf_threshold, solve_cubic_structure
from htallee.integrate import FateLabel
from htallee.manifolds import separatrix
from htallee.model import NondimParams

BASE = NondimParams(0.0365, 0.1, 0.21, 0.121)
U2 = 0.6152707445980359


def at(S):
    return BASE.with_(S=S)


@pytest.fixture(scope="module")
def cycle():
    return extract_unstable_cycle(BASE)


@pytest.fixture(scope="module")
def grid016():
    return compute_basins(at(0.16), resolution=100)


class TestGrid:
    def test_global_attractor(self):
        g = compute_basins(NondimParams(0.2, 0.1, 0.35, 0.1), resolution=60)
        assert basin_area_fraction(g) == (0.0, 1.0, 0.0)

    def test_fig07(self):
        g = compute_basins(at(0.0123), resolution=60)
        assert basin_area_fraction(g) == (0.0, 1.0, 0.0)

    def test_s01_all_origin(self):
        # P2 repels at S = 0.1, so no cell reaches it
        g = compute_basins(at(0.1), resolution=60)
        assert basin_area_fraction(g) == (0.0, 1.0, 0.0)

    def test_two_regions(self, grid016):
        to_p2, to_origin, rest = basin_area_fraction(grid016)
        assert 0 < to_p2 < 1 and 0 < to_origin < 1
        assert to_p2 + to_origin + rest == pytest.approx(1.0, abs=1e-15)
        assert to_p2 == pytest.approx(0.4075, abs=1e-12)

    def test_undecided_small(self, grid016):
        assert grid016.fractions()["Undecided"] < 0.02

    def test_axes(self, grid016):
        assert grid016.u[0] == pytest.approx(0.005) and grid016.v[-1] == pytest.approx(0.995)
        assert grid016.cell_size == (0.01, 0.01)
        assert grid016.labels.shape == (100, 100)

    def test_expanded_box(self):
        g = compute_basins(at(0.16), box=(0.0, 1.5, 0.0, 1.5), resolution=45)
        assert g.u[-1] > 1.0
        assert g.fractions()["Undecided"] == 0.0

    @pytest.mark.parametrize("box", [(0.5, 0.2, 0.0, 1.0), (-0.1, 1.0, 0.0, 1.0)])
    def test_bad_box(self, box):
        with pytest.raises(ValueError):
            compute_basins(at(0.16), box=box, resolution=4)

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            compute_basins(at(0.16), resolution=0)

    def test_roundtrip(self, grid016, tmp_path):
        grid016.save_labels(tmp_path / "b.labels")
        back = BasinGrid.load_labels(tmp_path / "b.labels")
        assert np.array_equal(back.labels, grid016.labels)
        assert back.params == grid016.params and back.box == grid016.box

    def test_csv(self, grid016, tmp_path):
        grid016.to_csv(tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "u,v,label" and len(lines) == 100 * 100 + 1
        assert lines[1].split(",")[2] in ("ToOrigin", "ToP2")

    def test_scan_direction(self):
        # the oracle records the direction: the P2 basin grows with S on this slice
        fr = [basin_area_fraction(compute_basins(at(s), resolution=100))[0] for s in (0.16, 0.17, 0.18, 0.19, 0.1915)]
        assert fr == pytest.approx([0.4075, 0.4201, 0.4313, 0.441, 0.4421], abs=1e-12)
        assert np.all(np.diff(fr) > 0)


class TestBoundary:
    def test_densify(self):
        pts = densify(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.1)
        assert len(pts) == 11 and np.diff(pts[:, 0]).max() <= 0.1 + 1e-15

    def test_label_boundary_simple(self):
        lab = np.zeros((4, 4), dtype=np.int8)
        lab[:, 2:] = 1
        g = BasinGrid(at(0.16), (0.0, 1.0, 0.0, 1.0), 4, lab)
        b = label_boundary(g)
        assert np.allclose(b[:, 0], 0.5) and len(b) == 4

    def test_hausdorff(self, grid016):
        d = boundary_distance(grid016, separatrix(at(0.16)).points)
        assert d < 2 * grid016.cell_size[0]


class TestCycle:
    def test_frozen(self, cycle):
        assert cycle.period == pytest.approx(250.5455641968938, rel=1e-6)
        assert cycle.multipliers[1] == pytest.approx(8.973652366591102, rel=1e-5)
        assert cycle.amplitude == pytest.approx(0.198, abs=2e-3)

    def test_closed_and_encircles(self, cycle):
        assert cycle.closure < 1e-5
        assert abs(cycle.winding_number((U2, U2))) == 1
        assert cycle.winding_number((0.9, 0.1)) == 0

    def test_unstable(self, cycle):
        assert cycle.stability == "unstable"
        assert cycle.multipliers[1] > 1
        # the trivial multiplier is one and the other matches Liouville's formula
        assert cycle.multipliers[0] == pytest.approx(1.0, abs=1e-5)
        assert cycle.multipliers[1] == pytest.approx(np.exp(cycle.divergence_integral), rel=1e-5)

    def test_sandwich(self, cycle):
        inner, outer = cycle_sandwich(BASE, cycle)
        assert (inner, outer) == (FateLabel.TO_P2, FateLabel.TO_ORIGIN)

    def test_hopf_smallness(self):
        s_star = hopf_threshold(BASE)
        small = extract_unstable_cycle(at(s_star + 1e-3), with_floquet=False)
        large = extract_unstable_cycle(at(s_star + 1e-2), with_floquet=False)
        assert small.amplitude < large.amplitude
        assert small.amplitude == pytest.approx(0.0498, abs=1e-3)

    def test_csv(self, cycle, tmp_path):
        cycle.to_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().startswith("u,v\n")

    @pytest.mark.parametrize("S", [0.1, 0.13, 0.16])
    def test_no_cycle(self, S):
        with pytest.raises(NoCycleError):
            extract_unstable_cycle(at(S))

    def test_separatrix_is_cycle(self, cycle):
        sep = separatrix(BASE)
        assert sep.kind == "cycle"
        cs = solve_cubic_structure(BASE)
        r_sep = np.linalg.norm(sep.points - cs.u2, axis=1).max()
        r_cyc = np.linalg.norm(cycle.points - cs.u2, axis=1).max()
        assert r_sep == pytest.approx(r_cyc, rel=1e-6)
