"""
Tests for binary grids, structuring elements, slicing, rasterization and faces.

Run with: pytest tests/test_grid.py -v
"""
from collections import deque

import numpy as np
import pytest

from morphoprot.errors import UnsupportedSize
from morphoprot.grid import (
    ORIGIN_SE,
    BinaryGrid,
    SEShape,
    StructuringElement,
    connected_components,
    make_se,
    minkowski_sum,
    project_faces,
    rasterize,
    scale_se,
    slice_cloud,
    to_pixel,
)
from morphoprot.ingest import Frame, PointCloud

from .conftest import grid_from_rows


def label_count(bits: np.ndarray, connectivity: int) -> int:
    """Flood-fill component count."""
    steps = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    h, w = bits.shape
    seen = np.zeros_like(bits)
    count = 0
    for r in range(h):
        for c in range(w):
            if bits[r, c] and not seen[r, c]:
                count += 1
                seen[r, c] = True
                queue = deque([(r, c)])
                while queue:
                    y, x = queue.popleft()
                    for dy, dx in steps:
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and bits[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            queue.append((yy, xx))
    return count


class TestBinaryGrid:
    def test_immutable(self):
        """The bit array cannot be written through."""
        grid = BinaryGrid.empty(8)
        with pytest.raises(ValueError):
            grid.bits[0, 0] = True

    def test_source_array_is_copied(self):
        arr = np.zeros((4, 4), dtype=bool)
        grid = BinaryGrid(arr)
        arr[0, 0] = True
        assert grid.is_empty()

    def test_from_points_and_pixels(self):
        """Pixels are (col, row); out-of-range pixels are dropped."""
        grid = BinaryGrid.from_points(5, 3, [(4, 0), (0, 2), (7, 7)])
        assert grid.shape == (3, 5)
        assert grid.pixels() == [(4, 0), (0, 2)]
        assert grid.popcount() == 2

    def test_set_operators(self):
        a = grid_from_rows(["##..", "...."])
        b = grid_from_rows([".##.", "...."])
        assert (a & b).pixels() == [(1, 0)]
        assert (a | b).popcount() == 3
        assert (a - b).pixels() == [(0, 0)]
        assert (~a).popcount() == 6
        assert (a & b).issubset(a)
        assert not a.issubset(b)

    def test_equality_and_unhashable(self):
        assert BinaryGrid.full(4) == BinaryGrid(np.ones((4, 4)))
        assert BinaryGrid.full(4) != BinaryGrid.full(4, 5)
        with pytest.raises(TypeError):
            hash(BinaryGrid.empty(4))

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            BinaryGrid(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            BinaryGrid(np.zeros(4))


class TestPgm:
    """P4/P5 export for visual inspection."""

    def test_p4_layout(self):
        """P4 output, padded rows included, reads back to the same grid."""
        grid = grid_from_rows(["#.......#", "........."])
        data = grid.to_pgm(binary=True)
        assert data.startswith(b"P4")
        assert BinaryGrid.from_pgm(data) == grid

    def test_p4_set_pixels_are_zero_bits(self):
        """PBM polarity: one set pixel in a row of eight is 0b01111111."""
        data = grid_from_rows(["#......."]).to_pgm(binary=True)
        assert data.endswith(bytes([0x7F]))
        assert grid_from_rows(["........"]).to_pgm(binary=True).endswith(bytes([0xFF]))

    def test_p5_layout(self):
        """P5 stores one byte per pixel, 255 for set pixels."""
        grid = grid_from_rows(["#.", ".#", "##"])
        data = grid.to_pgm(binary=False)
        assert data.startswith(b"P5")
        assert data.endswith(bytes([255, 0, 0, 255, 255, 255]))
        assert BinaryGrid.from_pgm(data) == grid


class TestStructuringElements:
    def test_square_one(self):
        se = make_se(SEShape.SQUARE, 1)
        assert len(se) == 9
        assert se.contains_origin
        assert se.radius == 1

    def test_disk_two(self):
        """disk r: dx² + dy² <= r²."""
        se = make_se("disk", 2)
        assert len(se) == 13
        assert (2, 0) in se.offsets
        assert (2, 1) not in se.offsets

    def test_cross_only_size_one(self):
        assert len(make_se(SEShape.CROSS, 1)) == 5
        with pytest.raises(UnsupportedSize):
            make_se(SEShape.CROSS, 2)

    def test_iteration_is_sorted(self):
        se = StructuringElement(frozenset({(1, 0), (-1, 0), (0, 0)}))
        assert list(se) == [(-1, 0), (0, 0), (1, 0)]

    def test_reflect(self):
        se = StructuringElement(frozenset({(1, 2), (0, 0)}))
        assert se.reflect().offsets == frozenset({(-1, -2), (0, 0)})

    def test_scale(self):
        """nS of square-1 is square-n; 0S is the origin."""
        square = make_se(SEShape.SQUARE, 1)
        assert scale_se(square, 0) == ORIGIN_SE
        assert scale_se(square, 3) == make_se(SEShape.SQUARE, 3)
        assert minkowski_sum(square, square) == make_se(SEShape.SQUARE, 2)

    @pytest.mark.parametrize("shape,size", [("square", 1), ("disk", 1), ("disk", 2), ("cross", 1)])
    @pytest.mark.parametrize("a,b", [(0, 2), (1, 1), (1, 2), (2, 3)])
    def test_scale_adds_under_minkowski_sum(self, shape, size, a, b):
        """(a+b)S = aS ⊕ bS."""
        se = make_se(shape, size)
        assert scale_se(se, a + b) == minkowski_sum(scale_se(se, a), scale_se(se, b))

    def test_empty_se_rejected(self):
        with pytest.raises(ValueError):
            StructuringElement(frozenset())


class TestSlicing:
    def _cloud(self, z):
        z = np.asarray(z, dtype=float)
        pts = np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
        return PointCloud(pts, Frame.NORMALIZED)

    def test_buckets_by_half_open_intervals(self):
        """z = -1 is in the first slice, z = 1 in the last."""
        slices = slice_cloud(self._cloud([-1.0, -0.95, -0.9, 0.0, 1.0]), 0.1)
        assert [s.index for s in slices] == [0, 1, 10, 19]
        assert [len(s) for s in slices] == [2, 1, 1, 1]
        assert slices[0].z_lo == pytest.approx(-1.0)
        assert slices[-1].z_hi == pytest.approx(1.0)

    def test_only_non_empty_slices(self):
        slices = slice_cloud(self._cloud([0.5, 0.55]), 0.5)
        assert len(slices) == 1
        assert slices[0].points.shape == (2, 2)

    def test_requires_normalized(self):
        with pytest.raises(ValueError):
            slice_cloud(PointCloud(np.zeros((1, 3)), Frame.ANGSTROM), 0.1)

    def test_bad_thickness(self):
        with pytest.raises(ValueError):
            slice_cloud(self._cloud([0.0]), 0.0)


class TestRasterize:
    def test_pixel_mapping(self):
        """-1 maps to 0, 1 clamps to the last column."""
        assert list(to_pixel(np.array([-1.0, 0.0, 1.0]), 8)) == [0, 4, 7]

    def test_single_points(self):
        grid = rasterize([(-1.0, -1.0), (0.0, 0.5)], 8)
        assert grid.pixels() == [(0, 0), (4, 6)]

    def test_dot_radius(self):
        """A dot of radius 1 is a 5-pixel plus."""
        grid = rasterize([(0.0, 0.0)], 16, dot_radius=1)
        assert grid.popcount() == 5

    def test_point_order_does_not_matter(self, rng):
        points = rng.uniform(-1.0, 1.0, size=(300, 2))
        expected = rasterize(points, 64, dot_radius=1)
        for _ in range(5):
            assert rasterize(rng.permutation(points), 64, dot_radius=1) == expected

    def test_empty_points(self):
        assert rasterize(np.empty((0, 2)), 16).is_empty()

    def test_small_resolution_rejected(self):
        with pytest.raises(ValueError):
            rasterize([(0.0, 0.0)], 4)


class TestFaces:
    def _cloud(self):
        pts = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.5], [0.0, 1.0, 1.0]])
        return PointCloud(pts, Frame.NORMALIZED)

    def test_axis_conventions(self):
        """Each face plots its own coordinate pair."""
        faces = project_faces(self._cloud(), 8)
        assert faces.front == rasterize([(-1, -1), (1, 0), (0, 1)], 8)
        assert faces.left == rasterize([(-1, -1), (0.5, 0), (1, 1)], 8)
        assert faces.right == rasterize([(1, -1), (-0.5, 0), (-1, 1)], 8)
        assert faces.top == rasterize([(-1, 1), (1, -0.5), (0, -1)], 8)
        assert faces.bottom == rasterize([(-1, -1), (1, 0.5), (0, 1)], 8)
        assert faces.back == BinaryGrid(faces.front.bits[:, ::-1])

    def test_order(self):
        names = [name for name, _ in project_faces(self._cloud(), 8).items()]
        assert names == ["front", "left", "right", "top", "bottom", "back"]

    def test_trace_connects_consecutive_points(self):
        """With tracing the front view is one 8-connected polyline."""
        faces = project_faces(self._cloud(), 32, trace=True)
        assert connected_components(faces.front, 8) == 1
        assert connected_components(project_faces(self._cloud(), 32).front, 8) == 3


class TestConnectedComponents:
    def test_diagonal_pixels(self):
        """Diagonal neighbours join under 8- but not 4-connectivity."""
        grid = grid_from_rows(["#.", ".#"])
        assert connected_components(grid, 8) == 1
        assert connected_components(grid, 4) == 2

    def test_bad_connectivity(self):
        with pytest.raises(ValueError):
            connected_components(BinaryGrid.empty(4), 6)

    @pytest.mark.slow
    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill(self, rng, connectivity):
        """scipy labelling agrees with a flood-fill count on random grids."""
        for _ in range(200):
            bits = rng.random((16, 16)) < 0.4
            assert connected_components(BinaryGrid(bits), connectivity) == label_count(bits, connectivity)
