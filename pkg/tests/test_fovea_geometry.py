import math
from collections import defaultdict
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from modules.errors import DimensionError, ParameterError
from modules.fovea_geometry import (
    CellKind,
    CircularParams,
    Lattice1D,
    Lattice2D,
    PixelGrid,
    RectParams,
    RotRectParams,
    build_circular_layout,
    build_identity_layout,
    build_rect_layout,
    build_rotrect_layout,
    cell_average,
    compute_weights,
    expand_to_pixels,
)


def assert_partition(layout):
    counts = np.bincount(layout.pixel_to_cell, minlength=layout.n_lattice)
    assert counts.sum() == layout.grid.M
    assert layout.pixel_to_cell.shape == (layout.grid.M,)
    assert layout.N <= layout.grid.M
    if isinstance(layout.lattice, Lattice2D):
        assert np.array_equal(layout.lattice.empty.ravel(), counts == 0)
    else:
        assert (counts > 0).all()


# ----------------------------------------------------------------------------
# circular
# ----------------------------------------------------------------------------


def test_circular_fovea_covering_fov_is_identity():
    grid = PixelGrid(8, 8)
    layout = build_circular_layout(CircularParams(center=(4.5, 4.5), r0=4.95, epsilon=2.0, Q=4), grid)
    assert layout.N == 64
    assert layout.fovea_cell_count == 64
    assert np.array_equal(layout.pixel_to_cell, np.arange(64))
    assert (layout.cell_kind == CellKind.FOVEA).all()
    assert layout.structure_meta.P == 0


def _brute_force_circular(grid, xc, yc, r0, eps, Q):
    fovea, periph = [], {}
    for m in range(grid.M):
        y, x = divmod(m, grid.X)
        x, y = x + 1, y + 1
        r = math.hypot(x - xc, y - yc)
        if r <= r0:
            fovea.append(m)
            continue
        p = 1
        while r > r0 * eps ** p:
            p += 1
        omega = math.atan2(yc - y, x - xc) % (2 * math.pi)
        q = min(int(math.floor(omega * Q / (2 * math.pi))) + 1, Q)
        periph[m] = (p, q)
    keys = sorted(set(periph.values()))
    expected = np.empty(grid.M, dtype=np.int64)
    for i, m in enumerate(fovea):
        expected[m] = i
    for m, key in periph.items():
        expected[m] = len(fovea) + keys.index(key)
    return expected, len(fovea) + len(keys)


def test_circular_matches_exhaustive_pixel_classification():
    grid = PixelGrid(8, 8)
    layout = build_circular_layout(CircularParams(center=(4.5, 4.5), r0=2, epsilon=2, Q=4), grid)
    expected, n_expected = _brute_force_circular(grid, 4.5, 4.5, 2, 2, 4)
    assert layout.N == n_expected
    assert np.array_equal(layout.pixel_to_cell, expected)


def test_circular_off_center_matches_oracle():
    grid = PixelGrid(24, 17)
    layout = build_circular_layout(CircularParams(center=(7.25, 10.5), r0=3, epsilon=1.5, Q=6), grid)
    expected, n_expected = _brute_force_circular(grid, 7.25, 10.5, 3, 1.5, 6)
    assert layout.N == n_expected
    assert np.array_equal(layout.pixel_to_cell, expected)


def test_circular_128_partition_and_metadata():
    grid = PixelGrid(128, 128)
    params = CircularParams(center=(64.5, 64.5), r0=12, epsilon=1.15, Q=24)
    layout = build_circular_layout(params, grid)
    meta = layout.structure_meta

    assert_partition(layout)
    assert isinstance(layout.lattice, Lattice1D)
    assert np.bincount(layout.pixel_to_cell).sum() == 16384
    assert layout.N <= meta.fovea_cell_count + meta.P * params.Q == meta.cell_bound
    assert meta.ring_outer_radii[-1] >= meta.max_corner_distance
    assert meta.ring_outer_radii.size == meta.P
    np.testing.assert_allclose(np.diff(meta.log_coords), 1.0, rtol=1e-9)
    np.testing.assert_allclose(meta.ring_center_radii[0], 12 * (1 + 1.15) / 2)


def test_circular_fovea_pixels_are_singletons():
    grid = PixelGrid(40, 30)
    params = CircularParams(center=(20.0, 15.5), r0=6, epsilon=1.3, Q=12)
    layout = build_circular_layout(params, grid)
    xs, ys = grid.coordinates()
    inside = np.hypot(xs - 20.0, ys - 15.5) <= 6
    cells = layout.pixel_to_cell[inside]
    assert np.all(layout.cell_counts[cells] == 1)
    assert np.all(layout.cell_kind[cells] == CellKind.FOVEA)
    # fovea cells come first, in raster order
    assert np.array_equal(cells, np.arange(inside.sum()))


def test_circular_rejects_bad_parameters():
    grid = PixelGrid(16, 16)
    with pytest.raises(ParameterError):
        build_circular_layout(CircularParams(center=(40.0, 8.0), r0=2, epsilon=1.5, Q=4), grid)
    with pytest.raises(ParameterError):
        CircularParams(center=(8.0, 8.0), r0=2, epsilon=1.0, Q=4)
    with pytest.raises(ParameterError):
        CircularParams(center=(8.0, 8.0), r0=0.5, epsilon=1.5, Q=4)
    with pytest.raises(ParameterError):
        CircularParams(center=(8.0, 8.0), r0=2, epsilon=1.5, Q=0)


# ----------------------------------------------------------------------------
# rect / rotrect
# ----------------------------------------------------------------------------


def test_rect_roi_covering_fov_is_identity():
    grid = PixelGrid(65, 65)
    layout = build_rect_layout(RectParams(center=(33, 33), m0=32, n0=32), grid)
    assert layout.N == 4225 == grid.M
    assert np.array_equal(layout.pixel_to_cell, np.arange(grid.M))
    assert (layout.cell_kind == CellKind.FOVEA).all()


def test_rect_centers_follow_layer_radii():
    grid = PixelGrid(33, 33)
    layout = build_rect_layout(RectParams(center=(17, 17), m0=4, n0=4, alpha1=2, alpha2=2), grid)
    meta = layout.structure_meta

    oracle = {17}
    oracle.update(17 + s * d for s in (-1, 1) for d in range(1, 5))
    oracle.update(min(33, max(1, 17 + s * round(4 * f))) for s in (-1, 1) for f in (2, 4))
    assert meta.x_centers.tolist() == sorted(oracle)
    assert meta.y_centers.tolist() == sorted(oracle)
    assert meta.U == 13 and layout.lattice.U == 13
    assert layout.N == 13 * 13


def test_rect_boundary_ties_go_to_lower_index():
    grid = PixelGrid(33, 33)
    layout = build_rect_layout(RectParams(center=(17, 17), m0=4, n0=4, alpha1=2, alpha2=2), grid)
    # centers 1 and 9 meet at x = 5; x = 5 belongs to the cell of center 1
    row = layout.pixel_to_cell.reshape(33, 33)[16]
    u = row - row.min()
    assert u[4] == 0 and u[5] == 1
    # the cell of center 9 stops where the ROI begins (x = 12 | 13)
    assert u[11] == 1 and u[12] == 2


def test_rect_roi_pixels_are_singleton_fovea_cells():
    grid = PixelGrid(50, 40)
    layout = build_rect_layout(RectParams(center=(20, 22), m0=5, n0=3, alpha1=1.3, alpha2=1.6), grid)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[22 - 3 - 1:22 + 3, 20 - 5 - 1:20 + 5] = True
    cells = layout.pixel_to_cell[mask.ravel()]
    assert np.all(layout.cell_counts[cells] == 1)
    assert np.all(layout.cell_kind[cells] == CellKind.FOVEA)
    assert np.array_equal(layout.fovea_pixel_mask(), mask)


def test_rect_fixed_cell_counts_large_scale():
    grid = PixelGrid(1024, 768)
    layout = build_rect_layout(RectParams(center=(512, 384), m0=150, n0=100, cells_x=341, cells_y=255), grid)
    assert layout.lattice.U == 341
    assert layout.lattice.V == 255
    assert layout.N == 86955


def test_rect_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        RectParams(center=(8, 8), m0=2, n0=2, alpha1=1.0)
    with pytest.raises(ParameterError):
        RectParams(center=(8, 8), m0=0, n0=2)
    with pytest.raises(ParameterError):
        RectParams(center=(8, 8), m0=2, n0=2, cells_x=10)
    with pytest.raises(ParameterError):
        build_rect_layout(RectParams(center=(20, 8), m0=2, n0=2), PixelGrid(16, 16))
    with pytest.raises(ParameterError):
        RotRectParams(rect=RectParams(center=(8, 8), m0=2, n0=2), theta=math.pi / 2)


def test_rotrect_zero_angle_equals_rect(rng):
    for _ in range(10):
        X, Y = (int(v) for v in rng.integers(12, 70, size=2))
        params = RectParams(center=(int(rng.integers(1, X + 1)), int(rng.integers(1, Y + 1))),
                            m0=int(rng.integers(1, 8)), n0=int(rng.integers(1, 8)),
                            alpha1=float(rng.uniform(1.05, 2.5)), alpha2=float(rng.uniform(1.05, 2.5)))
        grid = PixelGrid(X, Y)
        a = build_rect_layout(params, grid)
        b = build_rotrect_layout(RotRectParams(rect=params, theta=0.0), grid)
        assert np.array_equal(a.pixel_to_cell, b.pixel_to_cell)
        assert np.array_equal(a.cell_kind, b.cell_kind)
        assert a.lattice == b.lattice


def test_rotrect_partition_and_empty_cells():
    grid = PixelGrid(64, 64)
    params = RotRectParams(rect=RectParams(center=(32, 32), m0=6, n0=4, alpha1=1.4, alpha2=1.4), theta=0.3)
    layout = build_rotrect_layout(params, grid)
    assert_partition(layout)
    empty = layout.lattice.empty.ravel()
    assert empty.any()
    assert np.all(layout.cell_counts[empty] == 0)
    assert layout.N == int((~empty).sum()) < layout.n_lattice


def test_rotrect_fovea_cells_hold_roi_pixels():
    grid = PixelGrid(64, 64)
    theta = 0.3
    params = RotRectParams(rect=RectParams(center=(32, 32), m0=6, n0=4, alpha1=1.4, alpha2=1.4), theta=theta)
    layout = build_rotrect_layout(params, grid)
    xs, ys = grid.coordinates()
    dx, dy = xs - 32, ys - 32
    xr = math.cos(theta) * dx - math.sin(theta) * dy
    yr = math.sin(theta) * dx + math.cos(theta) * dy
    in_box = (np.abs(xr) <= 6) & (np.abs(yr) <= 4)

    cells = layout.pixel_to_cell[in_box]
    assert np.all(layout.cell_kind[cells] == CellKind.FOVEA)
    fovea = (layout.cell_kind == CellKind.FOVEA) & layout.nonempty
    assert layout.cell_counts[fovea].max() <= 2


def test_rotrect_cell_sizes_track_unrotated_layout():
    grid = PixelGrid(96, 96)
    rect = RectParams(center=(48, 48), m0=8, n0=8, alpha1=1.3, alpha2=1.3)
    flat = build_rect_layout(rect, grid)
    turned = build_rotrect_layout(RotRectParams(rect=rect, theta=0.3), grid)

    def fovea_pixels(layout):
        return int(layout.fovea_pixel_mask().sum())

    assert fovea_pixels(turned) == pytest.approx(fovea_pixels(flat), rel=0.1)
    assert np.median(turned.cell_counts[turned.nonempty]) == pytest.approx(
        np.median(flat.cell_counts[flat.nonempty]), abs=2)


# ----------------------------------------------------------------------------
# weights and transfers
# ----------------------------------------------------------------------------


def test_identity_weights_are_one():
    weights = compute_weights(build_identity_layout(PixelGrid(12, 9)))
    assert np.array_equal(weights.w, np.ones(108))


def test_weights_invert_cell_sizes_exactly(zoo32):
    for layout in zoo32.values():
        weights = compute_weights(layout)
        nonempty = weights.counts > 0
        assert np.array_equal(weights.w[nonempty], 1.0 / weights.counts[nonempty])
        assert np.all(weights.w[~nonempty] == 0)
        assert np.all((weights.w[nonempty] > 0) & (weights.w[nonempty] <= 1))
        assert np.array_equal(weights.w[nonempty] == 1, weights.counts[nonempty] == 1)
        fractions = weights.as_fractions()
        assert all(f * int(c) == 1 for f, c in zip(fractions, weights.counts) if c > 0)
        assert sum(f * int(c) for f, c in zip(fractions, weights.counts)) == Fraction(layout.N)


def test_four_pixel_cell_weight_is_quarter():
    grid = PixelGrid(9, 9)
    layout = build_rect_layout(RectParams(center=(5, 5), m0=1, n0=1, alpha1=2, alpha2=2), grid)
    weights = compute_weights(layout)
    assert (weights.counts == 4).any()
    assert np.all(weights.w[weights.counts == 4] == 0.25)


def test_partition_and_weight_fuzz(rng):
    for _ in range(200):
        X, Y = (int(v) for v in rng.integers(4, 129, size=2))
        grid = PixelGrid(X, Y)
        kind = rng.integers(0, 3)
        if kind == 0:
            params = CircularParams(center=(float(rng.uniform(1, X)), float(rng.uniform(1, Y))),
                                    r0=float(rng.uniform(1, 10)), epsilon=float(rng.uniform(1.05, 3)),
                                    Q=int(rng.integers(1, 33)))
            layout = build_circular_layout(params, grid)
        else:
            rect = RectParams(center=(int(rng.integers(1, X + 1)), int(rng.integers(1, Y + 1))),
                              m0=int(rng.integers(1, 12)), n0=int(rng.integers(1, 12)),
                              alpha1=float(rng.uniform(1.05, 3)), alpha2=float(rng.uniform(1.05, 3)))
            if kind == 1:
                layout = build_rect_layout(rect, grid)
            else:
                layout = build_rotrect_layout(RotRectParams(rect=rect, theta=float(rng.uniform(0, 1.5))), grid)
        assert_partition(layout)
        weights = compute_weights(layout)
        nonempty = weights.counts > 0
        assert np.array_equal(weights.w[nonempty], 1.0 / weights.counts[nonempty])
        assert all(f * int(c) == 1 for f, c in zip(weights.as_fractions(), weights.counts) if c > 0)


def test_cell_average_constant_and_identity(zoo16, rng):
    for layout in zoo16.values():
        means = cell_average(np.full((16, 16), 0.3), layout)
        np.testing.assert_allclose(means.ravel()[layout.nonempty], 0.3, rtol=1e-15)
        assert np.all(means.ravel()[~layout.nonempty] == 0)
    scene = rng.random((16, 16))
    identity = zoo16['identity']
    assert np.array_equal(cell_average(scene, identity), scene)


def test_cell_average_matches_grouping_pass(zoo16, rng):
    scene = rng.random((16, 16))
    for layout in zoo16.values():
        groups = defaultdict(list)
        for m, n in enumerate(layout.pixel_to_cell):
            groups[int(n)].append(scene.ravel()[m])
        means = cell_average(scene, layout).ravel()
        for n, values in groups.items():
            assert means[n] == pytest.approx(sum(values) / len(values), rel=1e-12)


def test_cell_average_rejects_wrong_shape(zoo16):
    with pytest.raises(DimensionError):
        cell_average(np.zeros((15, 16)), zoo16['rect'])


def test_expand_round_trip_and_one_hot(zoo16, rng):
    for layout in zoo16.values():
        values = rng.random(layout.lattice.shape)
        back = cell_average(expand_to_pixels(values, layout), layout).ravel()
        np.testing.assert_allclose(back[layout.nonempty], values.ravel()[layout.nonempty], rtol=1e-12)

        n = int(np.flatnonzero(layout.nonempty)[-1])
        one_hot = np.zeros(layout.n_lattice)
        one_hot[n] = 1.0
        mask = expand_to_pixels(one_hot.reshape(layout.lattice.shape), layout)
        assert mask.sum() == layout.cell_counts[n]
        assert set(np.unique(mask)) <= {0.0, 1.0}

    identity = zoo16['identity']
    scene = rng.random((16, 16))
    assert np.array_equal(expand_to_pixels(scene, identity), scene)
    with pytest.raises(DimensionError):
        expand_to_pixels(np.zeros(7), identity)


def test_coarser_growth_never_adds_cells(rng):
    for _ in range(150):
        X, Y = (int(v) for v in rng.integers(8, 80, size=2))
        grid = PixelGrid(X, Y)
        lo, hi = np.sort(rng.uniform(1.05, 2.5, size=2))

        center = (float(rng.uniform(1, X)), float(rng.uniform(1, Y)))
        r0, Q = float(rng.uniform(1, 8)), int(rng.integers(1, 25))
        fine = build_circular_layout(CircularParams(center=center, r0=r0, epsilon=lo, Q=Q), grid)
        coarse = build_circular_layout(CircularParams(center=center, r0=r0, epsilon=hi, Q=Q), grid)
        assert coarse.N <= fine.N

        base = RectParams(center=(int(rng.integers(1, X + 1)), int(rng.integers(1, Y + 1))),
                          m0=int(rng.integers(1, 10)), n0=int(rng.integers(1, 10)), alpha1=lo, alpha2=lo)
        for coarser in (replace(base, alpha1=hi), replace(base, alpha2=hi), replace(base, alpha1=hi, alpha2=hi)):
            a, b = build_rect_layout(base, grid), build_rect_layout(coarser, grid)
            assert b.N <= a.N
            assert b.N == b.lattice.U * b.lattice.V
            theta = float(rng.uniform(0, 1.2))
            turned_a = build_rotrect_layout(RotRectParams(rect=base, theta=theta), grid)
            turned_b = build_rotrect_layout(RotRectParams(rect=coarser, theta=theta), grid)
            assert turned_b.n_lattice <= turned_a.n_lattice


def test_rounding_collisions_push_layers_outward():
    grid = PixelGrid(21, 20)
    sizes = [build_rect_layout(RectParams(center=(7, 8), m0=6, n0=1, alpha1=a, alpha2=a), grid)
             for a in (1.26857, 1.30045)]
    assert [layout.lattice.V for layout in sizes] == [20, 19]
    assert sizes[1].N <= sizes[0].N
    # layers 1 and 2 both round to an offset of 1; the second moves out to 2
    assert sizes[1].structure_meta.y_centers.tolist()[:9] == [1, 2, 3, 4, 5, 6, 7, 8, 9]


def test_summary_reports_counts(zoo32):
    s = zoo32['circular'].summary()
    assert s['N'] == s['fovea_cells'] + s['periphery_cells']
    assert s['redundancy_reduction'] == pytest.approx((1024 - s['N']) / 1024)
    assert 'cell_bound' in s
    r = zoo32['rotrect'].summary()
    assert r['empty_cells'] == r['N_lattice'] - r['N']
