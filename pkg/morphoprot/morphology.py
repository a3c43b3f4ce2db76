"""Binary morphology kernel.

Erosion and dilation are computed as whole-array shifted ANDs/ORs, one per
structuring element offset. Pixels outside the grid are background for both
operations, so dilation clips at the border.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .grid import BinaryGrid, SEShape, StructuringElement

logger = logging.getLogger(__name__)


def _translate_into(out: np.ndarray, src: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Write src translated by (dx, dy) into a zeroed ``out``; out[r+dy, c+dx] = src[r, c]."""
    height, width = src.shape
    out[...] = False
    if abs(dx) >= width or abs(dy) >= height:
        return out
    out[max(0, dy):height + min(0, dy), max(0, dx):width + min(0, dx)] = \
        src[max(0, -dy):height + min(0, -dy), max(0, -dx):width + min(0, -dx)]
    return out


def _erode(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    result = np.ones_like(bits)
    scratch = np.empty_like(bits)
    for dx, dy in se:
        # p survives iff p + s is set, i.e. bits translated by -s
        result &= _translate_into(scratch, bits, -dx, -dy)
    return result


def _dilate(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    result = np.zeros_like(bits)
    scratch = np.empty_like(bits)
    for dx, dy in se:
        result |= _translate_into(scratch, bits, dx, dy)
    return result


def _bbox(bits: np.ndarray, margin: int = 0) -> Optional[tuple[slice, slice]]:
    """Bounding box of the set pixels grown by ``margin`` and clipped, or None if empty."""
    rows = np.flatnonzero(bits.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(bits.any(axis=0))
    height, width = bits.shape
    return (
        slice(max(0, rows[0] - margin), min(height, rows[-1] + margin + 1)),
        slice(max(0, cols[0] - margin), min(width, cols[-1] + margin + 1)),
    )


def erode(a: BinaryGrid, se: StructuringElement) -> BinaryGrid:
    """A ⊖ S: pixels p with p + s set in ``a`` for every s in ``se``."""
    return BinaryGrid(_erode(a.bits, se))


def dilate(a: BinaryGrid, se: StructuringElement) -> BinaryGrid:
    """A ⊕ S: union of ``a`` translated by every offset, clipped to the grid."""
    return BinaryGrid(_dilate(a.bits, se))


def opening(a: BinaryGrid, se: StructuringElement) -> BinaryGrid:
    """(A ⊖ S) ⊕ S."""
    return BinaryGrid(_dilate(_erode(a.bits, se), se))


def closing(a: BinaryGrid, se: StructuringElement) -> BinaryGrid:
    """(A ⊕ S) ⊖ S."""
    return BinaryGrid(_erode(_dilate(a.bits, se), se))


def complement(a: BinaryGrid) -> BinaryGrid:
    return ~a


# ---------------------------------------------------------------------------
# Skeleton
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SkeletonDecomposition:
    """Skeleton subsets Sk_0..Sk_N of a shape for one structuring element."""
    layers: tuple[tuple[int, BinaryGrid], ...]
    se: StructuringElement
    max_n: int
    width: int
    height: int
    empty_shape: bool = False

    def skeleton(self) -> BinaryGrid:
        """Union of all layers."""
        bits = np.zeros((self.height, self.width), dtype=bool)
        for _, layer in self.layers:
            bits |= layer.bits
        return BinaryGrid(bits)


def skeletonize(a: BinaryGrid, se: StructuringElement) -> SkeletonDecomposition:
    """Lantuéjoul decomposition Sk_n = (A ⊖ nS) minus its opening by S, n = 0..N.

    A ⊖ nS is taken as n successive erosions by S. N is the last n whose
    erosion is non-empty. An empty shape gives an empty, flagged decomposition.
    """
    if not se.contains_origin:
        raise ValueError("skeletonize needs a structuring element containing the origin")
    window = _bbox(a.bits)
    if window is None:
        logger.debug("skeletonize called on an empty shape")
        return SkeletonDecomposition((), se, -1, a.width, a.height, empty_shape=True)

    # Erosion never leaves the bounding box, so work on the crop
    current = np.array(a.bits[window])
    layers = []
    n = 0
    while current.any():
        eroded = _erode(current, se)
        layer = current & ~_dilate(eroded, se)
        full = np.zeros(a.shape, dtype=bool)
        full[window] = layer
        layers.append((n, BinaryGrid(full)))
        current = eroded
        n += 1
    return SkeletonDecomposition(tuple(layers), se, n - 1, a.width, a.height)


def reconstruct(sk: SkeletonDecomposition) -> BinaryGrid:
    """A' = union of Sk_n ⊕ nS.

    Evaluated as R_N = Sk_N, R_n = (R_{n+1} ⊕ S) ∪ Sk_n, which equals the
    union because dilation distributes over union and (X ⊕ S) ⊕ S = X ⊕ 2S.
    """
    if sk.empty_shape or not sk.layers:
        return BinaryGrid.empty(sk.width, sk.height)

    union = sk.skeleton().bits
    window = _bbox(union, margin=max(sk.max_n, 0) * sk.se.radius)
    by_scale = dict(sk.layers)
    result = np.zeros_like(union[window])
    for n in range(sk.max_n, -1, -1):
        if n < sk.max_n:
            result = _dilate(result, sk.se)
        if n in by_scale:
            result |= by_scale[n].bits[window]
    full = np.zeros((sk.height, sk.width), dtype=bool)
    full[window] = result
    return BinaryGrid(full)


# ---------------------------------------------------------------------------
# Geodesic dilation
# ---------------------------------------------------------------------------

class GeodesicResult(NamedTuple):
    result: BinaryGrid
    count: int


def geodesic_dilate(
    marker: BinaryGrid,
    mask: BinaryGrid,
    se: StructuringElement,
    max_iters: Optional[int] = None,
) -> GeodesicResult:
    """Iterate δ^k = (δ^(k-1) ⊕ S) ∩ mask from δ^0 = marker ∩ mask until stable.

    ``count`` is the smallest k >= 1 with δ^k = δ^(k-1). If ``max_iters`` is
    reached first the current iterate is returned with count = max_iters.

    Raises:
        DimensionMismatch: marker and mask differ in size
    """
    if marker.shape != mask.shape:
        raise DimensionMismatch(f"marker {marker.shape} vs mask {mask.shape}")

    window = _bbox(mask.bits)
    if window is None:
        return GeodesicResult(BinaryGrid.empty(mask.width, mask.height), 1)

    # Everything stays inside the mask, so iterate on its bounding box
    limit = mask.bits[window]
    current = marker.bits[window] & limit
    count = 0
    while True:
        count += 1
        grown = _dilate(current, se) & limit
        if np.array_equal(grown, current):
            break
        current = grown
        if max_iters is not None and count >= max_iters:
            logger.warning(f"Geodesic dilation stopped at max_iters={max_iters} before idempotency")
            break
    full = np.zeros(mask.shape, dtype=bool)
    full[window] = current
    return GeodesicResult(BinaryGrid(full), count)


# ---------------------------------------------------------------------------
# Distance-driven growth
# ---------------------------------------------------------------------------

def growth_distance(a: BinaryGrid, shape: Union[SEShape, str]) -> np.ndarray:
    """Distance from every pixel to the nearest set pixel of ``a``.

    The metric matches the shape so that ``distance <= k`` is exactly the
    dilation of ``a`` by the size-k element: Euclidean for disk, chessboard for
    square, taxicab for the k-fold cross.
    """
    if a.is_empty():
        raise ValueError("growth distance is undefined for an empty grid")
    background = ~a.bits
    shape = SEShape(shape)
    if shape == SEShape.DISK:
        return ndimage.distance_transform_edt(background)
    metric = "chessboard" if shape == SEShape.SQUARE else "taxicab"
    return ndimage.distance_transform_cdt(background, metric=metric).astype(np.float64)
