"""Box-counting fractal dimension of binary grids."""
import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constants import MIN_BOX_SCALES
from .errors import EmptyGrid, TooFewScales
from .grid import BinaryGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoxCountSeries:
    """Occupied box counts n_r for increasing box sizes r."""
    entries: tuple[tuple[int, int], ...]
    resolution: int

    @property
    def sizes(self) -> list[int]:
        return [r for r, _ in self.entries]

    @property
    def counts(self) -> list[int]:
        return [n for _, n in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_csv(self) -> str:
        """CSV with columns r, n_r, log_inv_r, log_n_r."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "n_r", "log_inv_r", "log_n_r"])
        for r, n in self.entries:
            writer.writerow([r, n, repr(math.log(1.0 / r)), repr(math.log(n))])
        return buf.getvalue()


@dataclass(frozen=True)
class DimensionFit:
    """Least-squares line through log n_r against log(1/r)."""
    dimension: float
    intercept: float
    r_squared: float
    sizes: tuple[int, ...]


def dyadic_sizes(side: int, max_size: Optional[int] = None) -> list[int]:
    """1, 2, 4, ... up to side/4 (or ``max_size`` when smaller)."""
    limit = max(1, side // 4)
    if max_size is not None:
        limit = min(limit, max_size)
    sizes = []
    r = 1
    while r <= limit:
        sizes.append(r)
        r *= 2
    return sizes


def _is_power_of_two(r: int) -> bool:
    return r >= 1 and (r & (r - 1)) == 0


def box_counts(grid: BinaryGrid, sizes: Sequence[int]) -> BoxCountSeries:
    """Count r x r cells, anchored at pixel (0, 0), holding at least one set pixel.

    The grid is zero-padded up to the next multiple of each r. Any power of two
    up to the longer grid side is accepted, so the coarsest box may cover the
    whole grid; dyadic_sizes stops at a quarter of it for fitting.

    Raises:
        EmptyGrid: grid has no set pixels
    """
    if grid.is_empty():
        raise EmptyGrid("cannot box-count an empty grid")
    side = max(grid.width, grid.height)
    ordered = sorted(set(int(r) for r in sizes))
    for r in ordered:
        if not _is_power_of_two(r) or r > side:
            raise ValueError(f"box size {r} must be a power of two no larger than {side}")

    entries = []
    for r in ordered:
        padded_h = -(-grid.height // r) * r
        padded_w = -(-grid.width // r) * r
        padded = np.zeros((padded_h, padded_w), dtype=bool)
        padded[:grid.height, :grid.width] = grid.bits
        occupied = padded.reshape(padded_h // r, r, padded_w // r, r).any(axis=(1, 3))
        entries.append((r, int(np.count_nonzero(occupied))))
    return BoxCountSeries(tuple(entries), side)


def _fit(log_inv_r: np.ndarray, log_n: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(log_inv_r, log_n, 1)
    predicted = slope * log_inv_r + intercept
    ss_res = float(np.sum((log_n - predicted) ** 2))
    ss_tot = float(np.sum((log_n - log_n.mean()) ** 2))
    # A flat series is fitted perfectly by a zero slope
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r_squared


def box_dimension(
    series: BoxCountSeries,
    window: Optional[str] = None,
    min_window: int = MIN_BOX_SCALES,
) -> DimensionFit:
    """Slope of log n_r versus log(1/r), with R² as a quality diagnostic.

    ``window="auto"`` fits only the contiguous run of at least ``min_window``
    scales with the highest R² (ties go to the wider run, then smaller sizes).

    Raises:
        TooFewScales: fewer than three entries
    """
    if len(series) < MIN_BOX_SCALES:
        raise TooFewScales(f"need at least {MIN_BOX_SCALES} box sizes, got {len(series)}")
    sizes = np.array(series.sizes, dtype=np.float64)
    counts = np.array(series.counts, dtype=np.float64)
    x = np.log(1.0 / sizes)
    y = np.log(counts)

    if window is None:
        slope, intercept, r2 = _fit(x, y)
        return DimensionFit(slope, intercept, r2, tuple(series.sizes))
    if window != "auto":
        raise ValueError(f"unknown fit window {window!r}")

    min_window = max(MIN_BOX_SCALES, min_window)
    if len(series) < min_window:
        raise TooFewScales(f"need at least {min_window} box sizes for a windowed fit, got {len(series)}")
    best = None
    for width in range(len(series), min_window - 1, -1):
        for start in range(0, len(series) - width + 1):
            part = slice(start, start + width)
            slope, intercept, r2 = _fit(x[part], y[part])
            if best is None or r2 > best[2] + 1e-12:
                best = (slope, intercept, r2, tuple(series.sizes[part]))
    logger.debug(f"Auto window picked sizes {best[3]} with R²={best[2]:.6f}")
    return DimensionFit(*best)
