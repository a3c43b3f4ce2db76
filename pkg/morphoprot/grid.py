"""Binary rasters: grids, structuring elements, slicing, projection, labeling."""
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.draw import line as draw_line

from .constants import FACE_NAMES
from .errors import UnsupportedSize
from .ingest import Frame, PointCloud

logger = logging.getLogger(__name__)

# Pixel coordinates are snapped to this many decimals before flooring so that
# rounding noise from normalization never moves a point across a pixel edge.
_SNAP_DECIMALS = 6


class BinaryGrid:
    """Immutable 2D bit raster, indexed ``bits[row, col]`` (row = y, col = x)."""

    __slots__ = ("_bits",)

    def __init__(self, bits: np.ndarray):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"grid must be a non-empty 2D array, got shape {arr.shape}")
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def empty(cls, width: int, height: Optional[int] = None) -> "BinaryGrid":
        return cls(np.zeros((height or width, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: Optional[int] = None) -> "BinaryGrid":
        return cls(np.ones((height or width, width), dtype=bool))

    @classmethod
    def from_points(cls, width: int, height: int, pixels: Iterable[tuple[int, int]]) -> "BinaryGrid":
        """Grid with the given (col, row) pixels set; out-of-range pixels are ignored."""
        arr = np.zeros((height, width), dtype=bool)
        for col, row in pixels:
            if 0 <= col < width and 0 <= row < height:
                arr[row, col] = True
        return cls(arr)

    @property
    def bits(self) -> np.ndarray:
        """Read-only boolean view, shape (height, width)."""
        return self._bits

    @property
    def width(self) -> int:
        return self._bits.shape[1]

    @property
    def height(self) -> int:
        return self._bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._bits.shape

    def popcount(self) -> int:
        return int(np.count_nonzero(self._bits))

    def is_empty(self) -> bool:
        return not self._bits.any()

    def pixels(self) -> list[tuple[int, int]]:
        """Set pixels as (col, row), row-major order."""
        rows, cols = np.nonzero(self._bits)
        return [(int(c), int(r)) for r, c in zip(rows, cols)]

    def issubset(self, other: "BinaryGrid") -> bool:
        return self.shape == other.shape and not np.any(self._bits & ~other._bits)

    def __and__(self, other: "BinaryGrid") -> "BinaryGrid":
        return BinaryGrid(self._bits & other._bits)

    def __or__(self, other: "BinaryGrid") -> "BinaryGrid":
        return BinaryGrid(self._bits | other._bits)

    def __sub__(self, other: "BinaryGrid") -> "BinaryGrid":
        return BinaryGrid(self._bits & ~other._bits)

    def __invert__(self) -> "BinaryGrid":
        return BinaryGrid(~self._bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryGrid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._bits, other._bits))

    __hash__ = None

    def __repr__(self) -> str:
        return f"BinaryGrid({self.width}x{self.height}, set={self.popcount()})"

    def to_pgm(self, binary: bool = True) -> bytes:
        """Serialize as P4 (1 bit per pixel, MSB-first rows) or P5 (0/255 bytes).

        Set pixels are white in both encodings. P4 follows the PBM convention
        where a 1 bit is black, so a set pixel is stored as a 0 bit.
        """
        img = Image.fromarray(self._bits.astype(np.uint8) * 255)
        if binary:
            img = img.convert("1", dither=Image.Dither.NONE)
        buf = io.BytesIO()
        img.save(buf, format="PPM")
        return buf.getvalue()

    @classmethod
    def from_pgm(cls, data: bytes) -> "BinaryGrid":
        """Read a P4 or P5 image; pixels brighter than mid-grey are set."""
        with Image.open(io.BytesIO(data)) as img:
            arr = np.asarray(img.convert("L"))
        return cls(arr > 127)


class SEShape(str, Enum):
    """Built-in structuring element shapes."""
    SQUARE = "square"
    DISK = "disk"
    CROSS = "cross"


@dataclass(frozen=True)
class StructuringElement:
    """Finite set of (dx, dy) offsets."""
    offsets: frozenset

    def __post_init__(self):
        offs = frozenset((int(dx), int(dy)) for dx, dy in self.offsets)
        if not offs:
            raise ValueError("structuring element needs at least one offset")
        object.__setattr__(self, "offsets", offs)

    def __len__(self) -> int:
        return len(self.offsets)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self.offsets))

    @property
    def contains_origin(self) -> bool:
        return (0, 0) in self.offsets

    @property
    def radius(self) -> int:
        """Largest |dx| or |dy|."""
        return max(max(abs(dx), abs(dy)) for dx, dy in self.offsets)

    def reflect(self) -> "StructuringElement":
        return StructuringElement(frozenset((-dx, -dy) for dx, dy in self.offsets))


ORIGIN_SE = StructuringElement(frozenset({(0, 0)}))


def make_se(shape: Union[SEShape, str], size: int) -> StructuringElement:
    """Built-in structuring element.

    square k: (2k+1) x (2k+1) block. disk r: dx^2 + dy^2 <= r^2.
    cross 1: origin plus its four neighbours.

    Raises:
        UnsupportedSize: cross with size other than 1
    """
    shape = SEShape(shape)
    if size < 1:
        raise ValueError(f"structuring element size must be >= 1, got {size}")
    if shape == SEShape.CROSS:
        if size != 1:
            raise UnsupportedSize(f"cross structuring element only supports size 1, got {size}")
        return StructuringElement(frozenset({(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}))
    span = range(-size, size + 1)
    if shape == SEShape.SQUARE:
        return StructuringElement(frozenset((dx, dy) for dx in span for dy in span))
    r2 = size * size
    return StructuringElement(frozenset((dx, dy) for dx in span for dy in span if dx * dx + dy * dy <= r2))


def minkowski_sum(a: StructuringElement, b: StructuringElement) -> StructuringElement:
    return StructuringElement(frozenset(
        (ax + bx, ay + by) for ax, ay in a.offsets for bx, by in b.offsets
    ))


def scale_se(se: StructuringElement, n: int) -> StructuringElement:
    """n-fold Minkowski self-sum nS; 0S is the origin alone."""
    if n < 0:
        raise ValueError(f"scale must be non-negative, got {n}")
    result = ORIGIN_SE
    for _ in range(n):
        result = minkowski_sum(result, se)
    return result


# ---------------------------------------------------------------------------
# Slicing and rasterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Slice:
    """Points whose normalized z lies in [z_lo, z_hi) (the top slice also takes z = 1)."""
    index: int
    z_lo: float
    z_hi: float
    points: np.ndarray  # (n, 2) normalized x, y

    def __len__(self) -> int:
        return len(self.points)


def _require_normalized(cloud: PointCloud) -> None:
    if cloud.frame != Frame.NORMALIZED:
        raise ValueError("expected a normalized point cloud")


def slice_cloud(cloud: PointCloud, thickness: float) -> list[Slice]:
    """Partition [-1, 1] into intervals of ``thickness`` and bucket points by z.

    Only non-empty slices are returned, ascending in z.
    """
    _require_normalized(cloud)
    if not 0 < thickness <= 2:
        raise ValueError(f"slice thickness must be in (0, 2], got {thickness}")

    count = max(1, math.ceil(round(2.0 / thickness, 9)))
    z = cloud.points[:, 2]
    index = np.floor(np.round((z + 1.0) / thickness, 9)).astype(np.int64)
    index = np.clip(index, 0, count - 1)

    slices = []
    for k in np.unique(index):
        members = cloud.points[index == k]
        z_lo = -1.0 + k * thickness
        z_hi = min(1.0, -1.0 + (k + 1) * thickness)
        slices.append(Slice(index=int(k), z_lo=z_lo, z_hi=z_hi, points=members[:, :2].copy()))
    logger.debug(f"Sliced {len(cloud)} points into {len(slices)} of {count} intervals")
    return slices


def to_pixel(values: np.ndarray, resolution: int) -> np.ndarray:
    """Map normalized coordinates in [-1, 1] to pixel indices, clamped to the border."""
    scaled = np.round((np.asarray(values, dtype=np.float64) + 1.0) / 2.0 * resolution, _SNAP_DECIMALS)
    return np.clip(np.floor(scaled).astype(np.int64), 0, resolution - 1)


def _stamp(arr: np.ndarray, cols: np.ndarray, rows: np.ndarray, se: StructuringElement) -> None:
    height, width = arr.shape
    for dx, dy in se:
        c = cols + dx
        r = rows + dy
        keep = (c >= 0) & (c < width) & (r >= 0) & (r < height)
        arr[r[keep], c[keep]] = True


def _check_resolution(resolution: int) -> None:
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")


def rasterize(points: Union[np.ndarray, Sequence[tuple[float, float]]], resolution: int, dot_radius: int = 0) -> BinaryGrid:
    """Plot normalized (x, y) points on a resolution x resolution grid.

    Each point sets one pixel, grown by a disk of ``dot_radius`` when positive.
    """
    _check_resolution(resolution)
    arr = np.zeros((resolution, resolution), dtype=bool)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts):
        se = make_se(SEShape.DISK, dot_radius) if dot_radius > 0 else ORIGIN_SE
        _stamp(arr, to_pixel(pts[:, 0], resolution), to_pixel(pts[:, 1], resolution), se)
    return BinaryGrid(arr)


# ---------------------------------------------------------------------------
# Face projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FaceSet:
    """The six orthographic views, in FACE_NAMES order."""
    front: BinaryGrid
    left: BinaryGrid
    right: BinaryGrid
    top: BinaryGrid
    bottom: BinaryGrid
    back: BinaryGrid

    def __post_init__(self):
        shapes = {face.shape for _, face in self.items()}
        if len(shapes) != 1:
            raise ValueError(f"faces must share dimensions, got {sorted(shapes)}")

    def items(self) -> list[tuple[str, BinaryGrid]]:
        return [(name, getattr(self, name)) for name in FACE_NAMES]


def _trace_grid(u: np.ndarray, v: np.ndarray, resolution: int, stroke_radius: int, trace: bool) -> BinaryGrid:
    cols = to_pixel(u, resolution)
    rows = to_pixel(v, resolution)
    if trace and len(cols) > 1:
        segments = [draw_line(int(r0), int(c0), int(r1), int(c1))
                    for r0, c0, r1, c1 in zip(rows[:-1], cols[:-1], rows[1:], cols[1:])]
        rows = np.concatenate([seg[0] for seg in segments])
        cols = np.concatenate([seg[1] for seg in segments])
    arr = np.zeros((resolution, resolution), dtype=bool)
    se = make_se(SEShape.DISK, stroke_radius) if stroke_radius > 0 else ORIGIN_SE
    _stamp(arr, cols, rows, se)
    return BinaryGrid(arr)


def project_faces(cloud: PointCloud, resolution: int, stroke_radius: int = 0, trace: bool = False) -> FaceSet:
    """Render the six axis-aligned orthographic views of a normalized cloud.

    front plots (x, y); back mirrors front left-to-right; right plots (-z, y);
    left plots (z, y); top plots (x, -z); bottom plots (x, z). With ``trace``,
    consecutive points are joined by Bresenham segments before stroking.
    """
    _require_normalized(cloud)
    _check_resolution(resolution)
    if len(cloud) == 0:
        raise ValueError("cannot project an empty cloud")
    x, y, z = cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]
    front = _trace_grid(x, y, resolution, stroke_radius, trace)
    return FaceSet(
        front=front,
        left=_trace_grid(z, y, resolution, stroke_radius, trace),
        right=_trace_grid(-z, y, resolution, stroke_radius, trace),
        top=_trace_grid(x, -z, resolution, stroke_radius, trace),
        bottom=_trace_grid(x, z, resolution, stroke_radius, trace),
        back=BinaryGrid(front.bits[:, ::-1]),
    )


# ---------------------------------------------------------------------------
# Connected components
# ---------------------------------------------------------------------------

_CONNECTIVITY = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def connected_components(grid: BinaryGrid, connectivity: int = 8) -> int:
    """Number of maximal foreground regions under 4- or 8-connectivity."""
    try:
        structure = _CONNECTIVITY[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}") from None
    _, count = ndimage.label(grid.bits, structure=structure)
    return int(count)
