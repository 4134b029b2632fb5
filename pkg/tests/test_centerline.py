from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import make_grid, make_mask
from hypothesis import given, settings
from hypothesis import strategies as st

from pcatmeasure import phantom as ph
from pcatmeasure.centerline import (
    SkeletonGraph,
    build_graph,
    find_bifurcations,
    locate_ostium,
    prune_spurs,
    walk_segment,
)
from pcatmeasure.errors import ShortCenterlineError
from pcatmeasure.morphology import skeletonize


def mask_of(points, shape, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    a = np.zeros(shape, bool)
    for p in points:
        a[tuple(p)] = True
    return make_mask(a, spacing, origin)


def degree_of(g, ijk):
    return int(g.degrees[g.node_id(ijk)])


def y_points(arm=5, c=(8, 8, 8)):
    """Three straight arms of ``arm`` voxels meeting at ``c``."""
    cx, cy, cz = c
    pts = [c]
    pts += [(cx, cy, cz + s) for s in range(1, arm + 1)]
    pts += [(cx + s, cy, cz - s) for s in range(1, arm + 1)]
    pts += [(cx - s, cy, cz - s) for s in range(1, arm + 1)]
    return pts


def double_y_points():
    """Vertical trunk from z=20 down to z=4, with a side arm leaving at z=16
    and another at z=8."""
    pts = [(10, 10, z) for z in range(4, 21)]
    pts += [(10 + s, 10, 16) for s in range(1, 5)]
    pts += [(10 - s, 10, 8) for s in range(1, 4)]
    return pts


class TestBuildGraph:
    def test_three_collinear(self):
        g = build_graph(mask_of([(1, 1, 1), (2, 1, 1), (3, 1, 1)], (5, 3, 3)))
        assert [degree_of(g, (i, 1, 1)) for i in (1, 2, 3)] == [1, 2, 1]

    def test_y_shape(self):
        g = build_graph(mask_of(y_points(), (17, 17, 17)))
        assert degree_of(g, (8, 8, 8)) == 3
        assert len(g.endpoints) == 3
        assert sorted(g.ijk(n) for n in g.endpoints) == [(3, 8, 3), (8, 8, 13), (13, 8, 3)]

    def test_single_voxel(self):
        g = build_graph(mask_of([(2, 2, 2)], (5, 5, 5)))
        assert len(g) == 1 and g.degrees.tolist() == [0]
        assert g.endpoints == []

    def test_empty_is_error(self):
        with pytest.raises(ShortCenterlineError, match="no centerline"):
            build_graph(make_mask(np.zeros((4, 4, 4))))

    def test_staircase_corner_is_not_a_junction(self):
        # face step then diagonal step: 26-adjacency alone would join (0,0) and (1,1)
        g = build_graph(mask_of([(0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 2, 0)], (4, 4, 1)))
        assert g.degrees.max() <= 2
        assert len(g.endpoints) == 2

    def test_invariants_on_random_skeletons(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.random((8, 8, 8)) < 0.15
            if not a.any():
                continue
            g = build_graph(make_mask(a))
            assert len(g) == a.sum()
            for n, nb in enumerate(g.neighbors):
                assert len(nb) == g.degrees[n]
                for m in nb:
                    assert n in g.neighbors[m]
                    assert np.abs(g.nodes[n] - g.nodes[m]).max() == 1
            assert g.endpoints == [n for n in range(len(g)) if g.degrees[n] == 1]

    def test_nodes_in_linear_index_order(self):
        g = build_graph(mask_of(y_points(), (17, 17, 17)))
        lin = [g.linear_index(n) for n in range(len(g))]
        assert lin == sorted(lin)


class TestPruneSpurs:
    def test_one_voxel_spur_removed(self):
        pts = [(i, 2, 2) for i in range(10)] + [(5, 3, 2)]
        g = build_graph(mask_of(pts, (10, 5, 5)))
        assert degree_of(g, (5, 2, 2)) == 3
        pruned = prune_spurs(g, 2.0)
        assert len(pruned) == 10
        with pytest.raises(KeyError):
            pruned.node_id((5, 3, 2))
        assert degree_of(pruned, (5, 2, 2)) == 2

    def test_zero_threshold_identity(self):
        g = build_graph(mask_of(y_points(), (17, 17, 17)))
        assert prune_spurs(g, 0.0) is g

    def test_long_arms_kept(self):
        g = build_graph(mask_of(y_points(arm=10), (23, 23, 23)))
        pruned = prune_spurs(g, 2.0)
        assert len(pruned) == len(g)
        assert sorted(pruned.degrees.tolist()) == sorted(g.degrees.tolist())

    def test_main_path_never_removed(self):
        pts = [(i, 2, 2) for i in range(3)]
        g = build_graph(mask_of(pts, (5, 5, 5)))
        assert len(prune_spurs(g, 100.0)) == 3

    def test_fixpoint(self):
        # spur of a spur: pruning the outer one leaves a short stub that must go too
        pts = [(i, 5, 5) for i in range(15)] + [(7, 6, 5), (7, 7, 5), (8, 7, 5)]
        g = build_graph(mask_of(pts, (15, 10, 10)))
        pruned = prune_spurs(g, 4.0)
        assert len(pruned) == 15
        assert pruned.degrees.max() == 2

    def test_negative_threshold(self):
        g = build_graph(mask_of([(0, 0, 0)], (2, 2, 2)))
        with pytest.raises(ValueError):
            prune_spurs(g, -1.0)


class TestBifurcations:
    def test_straight_has_none(self):
        g = build_graph(mask_of([(i, 2, 2) for i in range(10)], (10, 5, 5)))
        assert find_bifurcations(g) == []

    def test_y_junction(self):
        g = build_graph(mask_of(y_points(), (17, 17, 17)))
        assert [g.ijk(n) for n in find_bifurcations(g)] == [(8, 8, 8)]

    def test_double_y_nearest_first(self):
        g = build_graph(mask_of(double_y_points(), (20, 20, 22)))
        top = g.node_id((10, 10, 20))
        bottom = g.node_id((10, 10, 4))
        assert [g.ijk(n) for n in find_bifurcations(g, top)] == [(10, 10, 16), (10, 10, 8)]
        assert [g.ijk(n) for n in find_bifurcations(g, bottom)] == [(10, 10, 8), (10, 10, 16)]
        # without an ostium: x-fastest linear index, so smaller z first
        assert [g.ijk(n) for n in find_bifurcations(g)] == [(10, 10, 8), (10, 10, 16)]

    def test_branch_phantom_junction_near_analytic_point(self, yshape):
        spec, _, vessel, _ = yshape
        g = prune_spurs(build_graph(skeletonize(vessel)), 3.0)
        bifs = find_bifurcations(g)
        assert len(bifs) == 1
        expect = (np.asarray(spec.meta["branch_point"]) - spec.origin) / spec.spacing
        assert np.linalg.norm(g.nodes[bifs[0]] - expect) <= 2.0


class TestOstium:
    def test_aorta_blob_touching_one_end(self):
        pts = [(10, 10, z) for z in range(5, 25)]
        a = np.zeros((21, 21, 40), bool)
        i, j, k = np.indices(a.shape)
        a[(i - 10) ** 2 + (j - 10) ** 2 + (k - 31) ** 2 <= 36] = True  # sphere touching z=25
        aorta = make_mask(a)
        g = build_graph(mask_of(pts, a.shape))
        got = g.ijk(locate_ostium(g, aorta))
        # brute force: the endpoint with the smallest distance to any aorta voxel
        ends = [g.ijk(n) for n in g.endpoints]
        av = np.argwhere(a)
        best = min(ends, key=lambda e: np.min(np.linalg.norm(av - e, axis=1)))
        assert got == best == (10, 10, 24)

    def test_vertical_tube_top_without_aorta(self):
        g = build_graph(mask_of([(3, 3, z) for z in range(2, 12)], (7, 7, 14)))
        assert g.ijk(locate_ostium(g)) == (3, 3, 11)

    def test_right_wins_height_tie(self):
        g = build_graph(mask_of([(x, 3, 3) for x in range(1, 9)], (10, 7, 7)))
        assert g.ijk(locate_ostium(g)) == (8, 3, 3)

    def test_equidistant_smaller_linear_index(self):
        # horizontal line along y; aorta centered below its midpoint
        a = np.zeros((9, 15, 12), bool)
        a[3:6, 6:9, 0:3] = True
        pts = [(4, y, 8) for y in range(3, 12)]
        g = build_graph(mask_of(pts, a.shape))
        assert g.ijk(locate_ostium(g, make_mask(a))) == (4, 3, 8)

    def test_cyclic_skeleton_is_error(self):
        ring = [(2, 2, 2), (3, 2, 2), (4, 3, 2), (4, 4, 2), (3, 5, 2), (2, 5, 2), (1, 4, 2), (1, 3, 2)]
        g = build_graph(mask_of(ring, (7, 8, 5)))
        assert not g.endpoints
        with pytest.raises(ShortCenterlineError):
            locate_ostium(g)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), use_aorta=st.booleans())
    def test_relabeling_invariance(self, seed, use_aorta):
        rng = np.random.default_rng(seed)
        a = rng.random((7, 7, 7)) < 0.2
        a[0, 0, 0] = a[0, 0, 1] = True  # at least one endpoint pair
        a[0, 1, :] = False
        a[1, 0, :] = a[1, 1, :] = False
        g = build_graph(make_mask(a))
        aorta = None
        if use_aorta:
            b = np.zeros_like(a)
            b[rng.integers(0, 7), rng.integers(0, 7), rng.integers(0, 7)] = True
            aorta = make_mask(b)
        perm = rng.permutation(len(g))
        inv = np.argsort(perm)
        shuffled = SkeletonGraph(
            g.nodes[perm],
            tuple(tuple(int(inv[m]) for m in g.neighbors[old]) for old in perm),
            g.shape, g.spacing, g.origin,
        )
        assert shuffled.ijk(locate_ostium(shuffled, aorta)) == g.ijk(locate_ostium(g, aorta))


def straight_path(n_vox, spacing):
    shape = (5, 5, n_vox + 4)
    pts = [(2, 2, z) for z in range(2, n_vox + 2)]
    g = build_graph(mask_of(pts, shape, (spacing,) * 3))
    dt = make_grid(np.ones(shape), (spacing,) * 3)
    return g, dt, g.node_id(pts[0])


class TestWalkSegment:
    def test_straight_100mm(self):
        g, dt, start = straight_path(201, 0.5)  # 200 steps of 0.5 mm
        p = walk_segment(g, start, 10.0, 40.0, dt)
        assert len(p) == 81
        assert p.start_offset_mm == 10.0
        assert p.arc_length[0] == 0.0 and p.length_mm == 40.0
        assert not p.truncated
        assert p.points[0].tolist() == [2, 2, 22] and p.points[-1].tolist() == [2, 2, 102]

    def test_zero_length(self):
        g, dt, start = straight_path(21, 0.5)
        p = walk_segment(g, start, 0.0, 0.0, dt)
        assert len(p) == 1 and p.length_mm == 0.0

    def test_short_branch_truncated(self):
        g, dt, start = straight_path(61, 0.5)  # 30 mm
        p = walk_segment(g, start, 10.0, 40.0, dt)
        assert p.truncated
        assert p.length_mm == 20.0

    def test_skip_beyond_branch(self):
        g, dt, start = straight_path(11, 1.0)
        with pytest.raises(ShortCenterlineError):
            walk_segment(g, start, 20.0, 5.0, dt)

    def test_start_not_in_graph(self):
        g, dt, _ = straight_path(11, 1.0)
        with pytest.raises(KeyError):
            walk_segment(g, (0, 0, 0), 0.0, 5.0, dt)
        with pytest.raises(KeyError):
            walk_segment(g, len(g) + 3, 0.0, 5.0, dt)

    def test_negative_lengths(self):
        g, dt, start = straight_path(11, 1.0)
        with pytest.raises(ValueError):
            walk_segment(g, start, -1.0, 5.0, dt)

    def test_radius_read_from_dt(self):
        g, _, start = straight_path(11, 1.0)
        data = np.zeros(g.shape)
        data[2, 2, :] = np.arange(g.shape[2]) * 0.25 + 1.0
        p = walk_segment(g, start, 0.0, 5.0, make_grid(data))
        assert np.array_equal(p.radius, data[2, 2, p.points[:, 2]])
        assert np.array_equal(p.diameter, 2 * p.radius)

    def test_follows_wider_branch(self):
        pts = y_points(arm=8, c=(10, 5, 10))
        shape = (21, 11, 21)
        g = build_graph(mask_of(pts, shape))
        dt = np.ones(shape)
        for s in range(1, 9):
            dt[10 + s, 5, 10 - s] = 2.0  # the +x daughter is the main vessel
        top = g.node_id((10, 5, 18))
        p = walk_segment(g, top, 0.0, 100.0, make_grid(dt))
        assert p.points[-1].tolist() == [18, 5, 2]
        assert p.truncated

    @pytest.mark.parametrize("spacing", [(0.5, 0.5, 0.5), (0.4, 0.7, 1.1)])
    def test_arc_equals_independent_resummation(self, spacing):
        rng = np.random.default_rng(9)
        p = np.array([2, 2, 2])
        pts = [tuple(p)]
        for _ in range(40):
            step = rng.integers(-1, 2, 3)
            step[2] = 1
            p = p + step
            p[:2] = np.clip(p[:2], 1, 12)
            pts.append(tuple(int(v) for v in p))
        shape = (14, 14, 46)
        g = build_graph(mask_of(pts, shape, spacing))
        dt = make_grid(np.ones(shape), spacing)
        path = walk_segment(g, g.node_id(pts[0]), 3.0, 12.0, dt)
        assert np.all(np.diff(path.arc_length) > 0)
        assert np.abs(np.diff(path.points, axis=0)).max() == 1
        resum = [0.0]
        for a, b in zip(path.points, path.points[1:]):
            resum.append(resum[-1] + math.sqrt(sum(((int(b[k]) - int(a[k])) * spacing[k]) ** 2 for k in range(3))))
        assert np.allclose(path.arc_length, resum, rtol=0, atol=1e-12)


def test_graph_json_dump(straight):
    spec, _, vessel, _ = straight
    g = build_graph(skeletonize(vessel))
    d = g.to_json_dict()
    assert len(d["nodes"]) == len(g)
    n0 = d["nodes"][0]
    assert set(n0) == {"id", "ijk", "world_mm", "degree", "neighbors"}
    assert n0["world_mm"] == pytest.approx(list(np.asarray(spec.origin) + np.asarray(n0["ijk"]) * spec.spacing))


def test_phantom_y_single_component(yshape):
    _, _, vessel, _ = yshape
    g = build_graph(skeletonize(vessel))
    assert len(g.components()) == 1
    assert ph.PRESETS["y"] is ph.y_phantom
