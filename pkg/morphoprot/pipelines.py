"""End-to-end comparison pipelines.

Method 1 slices a structure along z, grows each slice into one connected
component, skeletonizes it and box-counts the stacked skeletons (D_p).
Method 2 renders six orthographic faces of two structures and counts the
geodesic dilations needed to rebuild each face from their intersection (δ_p).
The two signatures combine into a similar/dissimilar verdict.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, NamedTuple, Optional, Sequence, TypeVar, Union

import numpy as np

from . import constants as C
from .errors import ConfigError, EmptyGrid, ParamsMismatch
from .fractal import box_counts, box_dimension, dyadic_sizes
from .grid import (
    BinaryGrid,
    SEShape,
    Slice,
    connected_components,
    make_se,
    project_faces,
    rasterize,
    slice_cloud,
)
from .ingest import Selector, StructureModel, normalize, select_points
from .morphology import geodesic_dilate, growth_distance, skeletonize

if TYPE_CHECKING:
    from .cache import SignatureCache

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def _ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map in input order, on a thread pool when threads > 1."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))


def _require_positive(**values) -> None:
    for name, value in values.items():
        if value is None or value <= 0:
            raise ConfigError(f"{name} must be positive, got {value!r}", key=name)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Method1Params:
    """Stacked-skeleton fractal signature settings."""
    selector: Selector = Selector(C.M1_SELECTOR)
    slice_thickness: float = C.M1_SLICE_THICKNESS
    resolution: int = C.M1_RESOLUTION
    dot_radius: int = C.M1_DOT_RADIUS
    growth_shape: SEShape = SEShape(C.M1_GROWTH_SHAPE)
    growth_step: int = C.M1_GROWTH_STEP
    max_growth_iters: int = C.M1_MAX_GROWTH_ITERS
    skeleton_shape: SEShape = SEShape(C.M1_SKELETON_SHAPE)
    skeleton_size: int = C.M1_SKELETON_SIZE
    box_max: int = C.M1_BOX_MAX
    fit_window: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "selector", Selector(self.selector))
        object.__setattr__(self, "growth_shape", SEShape(self.growth_shape))
        object.__setattr__(self, "skeleton_shape", SEShape(self.skeleton_shape))
        _require_positive(
            slice_thickness=self.slice_thickness,
            resolution=self.resolution,
            growth_step=self.growth_step,
            max_growth_iters=self.max_growth_iters,
            skeleton_size=self.skeleton_size,
            box_max=self.box_max,
        )
        if self.slice_thickness > 2:
            raise ConfigError(f"slice_thickness must be <= 2, got {self.slice_thickness}", key="slice_thickness")
        if self.dot_radius < 0:
            raise ConfigError(f"dot_radius must be >= 0, got {self.dot_radius}", key="dot_radius")
        if self.fit_window not in (None, "auto"):
            raise ConfigError(f"fit_window must be 'auto' or unset, got {self.fit_window!r}", key="fit_window")

    @property
    def box_sizes(self) -> tuple[int, ...]:
        return tuple(dyadic_sizes(self.resolution, self.box_max))

    @property
    def skeleton_se(self):
        return make_se(self.skeleton_shape, self.skeleton_size)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["selector"] = self.selector.value
        data["growth_shape"] = self.growth_shape.value
        data["skeleton_shape"] = self.skeleton_shape.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Method1Params":
        return cls(**data)


@dataclass(frozen=True)
class Method2Params:
    """Six-face geodesic profile settings."""
    selector: Selector = Selector(C.M2_SELECTOR)
    resolution: int = C.M2_RESOLUTION
    stroke_radius: int = C.M2_STROKE_RADIUS
    trace: bool = C.M2_TRACE
    geodesic_shape: SEShape = SEShape(C.M2_GEODESIC_SHAPE)
    geodesic_size: int = C.M2_GEODESIC_SIZE
    max_iters: int = C.M2_MAX_ITERS

    def __post_init__(self):
        object.__setattr__(self, "selector", Selector(self.selector))
        object.__setattr__(self, "geodesic_shape", SEShape(self.geodesic_shape))
        _require_positive(
            resolution=self.resolution,
            geodesic_size=self.geodesic_size,
            max_iters=self.max_iters,
        )
        if self.stroke_radius < 0:
            raise ConfigError(f"stroke_radius must be >= 0, got {self.stroke_radius}", key="stroke_radius")

    @property
    def geodesic_se(self):
        return make_se(self.geodesic_shape, self.geodesic_size)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["selector"] = self.selector.value
        data["geodesic_shape"] = self.geodesic_shape.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Method2Params":
        return cls(**data)


@dataclass(frozen=True)
class Thresholds:
    """Similarity requires rho <= rho and delta_p <= delta."""
    rho: float = C.RHO_THRESHOLD
    delta: int = C.DELTA_THRESHOLD

    def to_dict(self) -> dict:
        return {"rho": self.rho, "delta": self.delta}


class Verdict(str, Enum):
    SIMILAR = "similar"
    DISSIMILAR = "dissimilar"


# ---------------------------------------------------------------------------
# Method 1
# ---------------------------------------------------------------------------

class ConnectResult(NamedTuple):
    grid: BinaryGrid
    iters: int
    capped: bool = False
    empty: bool = False


def connect_slice(
    grid: BinaryGrid,
    growth_shape: Union[SEShape, str] = SEShape.DISK,
    step: int = C.M1_GROWTH_STEP,
    max_iters: int = C.M1_MAX_GROWTH_ITERS,
) -> ConnectResult:
    """Grow a slice raster until it forms one 8-connected component.

    Iteration k dilates the original raster by the ``growth_shape`` element
    of size k * step. Stops at the first k with at most one component, or at
    ``max_iters`` (flagged ``capped``). Empty and already-connected grids come
    back unchanged with k = 0.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if grid.is_empty():
        return ConnectResult(grid, 0, empty=True)
    if connected_components(grid, 8) <= 1:
        return ConnectResult(grid, 0)

    distance = growth_distance(grid, growth_shape)
    grown = grid
    for k in range(1, max_iters + 1):
        grown = BinaryGrid(distance <= k * step)
        if connected_components(grown, 8) <= 1:
            return ConnectResult(grown, k)
    logger.warning(f"Slice still disconnected after {max_iters} growth iterations")
    return ConnectResult(grown, max_iters, capped=True)


@dataclass(frozen=True, eq=False)
class SliceRecord:
    """Per-slice metadata from the stacked skeleton pipeline."""
    index: int
    z_lo: float
    z_hi: float
    atom_count: int
    components: int
    growth_iters: int
    capped: bool
    raster: BinaryGrid = field(repr=False)
    grown: BinaryGrid = field(repr=False)
    skeleton: BinaryGrid = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "z_lo": self.z_lo,
            "z_hi": self.z_hi,
            "atom_count": self.atom_count,
            "components": self.components,
            "growth_iters": self.growth_iters,
            "capped": self.capped,
        }


class StackedSkeleton(NamedTuple):
    grid: BinaryGrid
    slices: list[SliceRecord]


def _process_slice(piece: Slice, params: Method1Params) -> SliceRecord:
    raster = rasterize(piece.points, params.resolution, params.dot_radius)
    components = connected_components(raster, 8)
    connected = connect_slice(raster, params.growth_shape, params.growth_step, params.max_growth_iters)
    skeleton = skeletonize(connected.grid, params.skeleton_se).skeleton()
    logger.debug(
        f"Slice {piece.index} [{piece.z_lo:.3f}, {piece.z_hi:.3f}): {len(piece)} atoms, "
        f"{components} components, grown k={connected.iters}, skeleton {skeleton.popcount()} px"
    )
    return SliceRecord(
        index=piece.index,
        z_lo=piece.z_lo,
        z_hi=piece.z_hi,
        atom_count=len(piece),
        components=components,
        growth_iters=connected.iters,
        capped=connected.capped,
        raster=raster,
        grown=connected.grid,
        skeleton=skeleton,
    )


def stacked_skeleton(model: StructureModel, params: Method1Params = Method1Params(), threads: int = 1) -> StackedSkeleton:
    """Pixelwise OR of per-slice skeletons, plus per-slice metadata.

    Raises:
        EmptySelection: the selector matches no atom
    """
    cloud = normalize(select_points(model, params.selector))
    pieces = slice_cloud(cloud, params.slice_thickness)
    records = _ordered_map(lambda piece: _process_slice(piece, params), pieces, threads)

    stacked = np.zeros((params.resolution, params.resolution), dtype=bool)
    for record in records:
        stacked |= record.skeleton.bits
    return StackedSkeleton(BinaryGrid(stacked), records)


@dataclass(frozen=True)
class FractalSignature:
    """D_p of a structure's stacked skeleton."""
    pdb_id: str
    d_p: float
    r_squared: float
    slice_count: int
    params: Method1Params
    capped_slices: int = 0

    def to_dict(self) -> dict:
        return {
            "pdb_id": self.pdb_id,
            "d_p": self.d_p,
            "r_squared": self.r_squared,
            "slice_count": self.slice_count,
            "capped_slices": self.capped_slices,
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FractalSignature":
        return cls(
            pdb_id=data["pdb_id"],
            d_p=float(data["d_p"]),
            r_squared=float(data["r_squared"]),
            slice_count=int(data["slice_count"]),
            params=Method1Params.from_dict(data["params"]),
            capped_slices=int(data.get("capped_slices", 0)),
        )


def signature_from_stack(pdb_id: str, stack: StackedSkeleton, params: Method1Params) -> FractalSignature:
    """Box dimension of an already computed stacked skeleton.

    Raises:
        EmptyGrid: the stacked skeleton has no set pixels
    """
    if stack.grid.is_empty():
        raise EmptyGrid(f"stacked skeleton of {pdb_id} is empty")
    fit = box_dimension(box_counts(stack.grid, params.box_sizes), window=params.fit_window)
    capped = sum(1 for record in stack.slices if record.capped)
    if fit.r_squared < 0.9:
        logger.warning(f"Low R²={fit.r_squared:.4f} for {pdb_id}; stacked skeleton may not be fractal-like")
    return FractalSignature(
        pdb_id=pdb_id,
        d_p=fit.dimension,
        r_squared=fit.r_squared,
        slice_count=len(stack.slices),
        params=params,
        capped_slices=capped,
    )


def fractal_signature(model: StructureModel, params: Method1Params = Method1Params(), threads: int = 1) -> FractalSignature:
    """D_p of the stacked skeleton of ``model``.

    Raises:
        EmptyGrid: the stacked skeleton has no set pixels
    """
    signature = signature_from_stack(model.pdb_id, stacked_skeleton(model, params, threads), params)
    logger.info(f"D_p({model.pdb_id}) = {signature.d_p:.6f} over {signature.slice_count} slices")
    return signature


def signature_for(
    model: StructureModel,
    params: Method1Params,
    threads: int = 1,
    cache: Optional["SignatureCache"] = None,
) -> FractalSignature:
    """fractal_signature, served from ``cache`` when one is given."""
    if cache is None:
        return fractal_signature(model, params, threads)
    return cache.get_or_compute(model, params, lambda: fractal_signature(model, params, threads))


def rho(a: FractalSignature, b: FractalSignature) -> float:
    """|D_p(a) - D_p(b)|.

    Raises:
        ParamsMismatch: signatures were computed with different parameters
    """
    if a.params != b.params:
        raise ParamsMismatch(f"signatures of {a.pdb_id} and {b.pdb_id} use different Method 1 parameters")
    return abs(a.d_p - b.d_p)


# ---------------------------------------------------------------------------
# Method 2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceCount:
    """Geodesic dilation counts of one face for the source and target structure."""
    name: str
    count_s: int
    count_t: int
    empty_marker: bool = False

    @property
    def difference(self) -> int:
        return abs(self.count_s - self.count_t)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "count_s": self.count_s,
            "count_t": self.count_t,
            "empty_marker": self.empty_marker,
        }


@dataclass(frozen=True)
class GeodesicProfile:
    """Six face count pairs and δ_p = Σ |count_s - count_t|."""
    faces: tuple[FaceCount, ...]
    delta_p: int

    def __post_init__(self):
        if tuple(face.name for face in self.faces) != C.FACE_NAMES:
            raise ValueError(f"faces must be ordered {C.FACE_NAMES}")

    @classmethod
    def from_counts(cls, counts_s: Sequence[int], counts_t: Sequence[int]) -> "GeodesicProfile":
        """Profile from per-face counts in FACE_NAMES order."""
        if len(counts_s) != len(C.FACE_NAMES) or len(counts_t) != len(C.FACE_NAMES):
            raise ValueError(f"expected {len(C.FACE_NAMES)} counts per structure")
        faces = tuple(FaceCount(name, int(s), int(t)) for name, s, t in zip(C.FACE_NAMES, counts_s, counts_t))
        return cls(faces, sum(face.difference for face in faces))

    @property
    def counts_source(self) -> tuple[int, ...]:
        return tuple(face.count_s for face in self.faces)

    @property
    def counts_target(self) -> tuple[int, ...]:
        return tuple(face.count_t for face in self.faces)

    def recompute_delta(self) -> int:
        return sum(face.difference for face in self.faces)

    def to_dict(self) -> dict:
        return {"faces": [face.to_dict() for face in self.faces], "delta_p": self.delta_p}


def _render_faces(model: StructureModel, params: Method2Params):
    cloud = normalize(select_points(model, params.selector))
    return project_faces(cloud, params.resolution, params.stroke_radius, params.trace)


def geodesic_profile(
    model_s: StructureModel,
    model_t: StructureModel,
    params: Method2Params = Method2Params(),
    threads: int = 1,
) -> GeodesicProfile:
    """Per face i: marker f_i ∩ g_i, geodesic counts towards f_i and g_i.

    Each structure is normalized on its own; no superposition is attempted.
    A face whose marker is empty contributes max_iters to both counts and is
    flagged ``empty_marker``.
    """
    faces_s, faces_t = _ordered_map(lambda m: _render_faces(m, params), [model_s, model_t], threads)
    se = params.geodesic_se

    def count_face(name: str) -> FaceCount:
        f = getattr(faces_s, name)
        g = getattr(faces_t, name)
        marker = f & g
        if marker.is_empty():
            logger.warning(f"Empty marker on {name} face of {model_s.pdb_id}/{model_t.pdb_id}")
            return FaceCount(name, params.max_iters, params.max_iters, empty_marker=True)
        count_s = geodesic_dilate(marker, f, se, params.max_iters).count
        count_t = geodesic_dilate(marker, g, se, params.max_iters).count
        logger.debug(f"Face {name}: {count_s} vs {count_t} geodesic dilations")
        return FaceCount(name, count_s, count_t)

    faces = tuple(_ordered_map(count_face, list(C.FACE_NAMES), threads))
    return GeodesicProfile(faces, sum(face.difference for face in faces))


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

def verdict_for(rho_value: float, delta_p: int, thresholds: Thresholds = Thresholds()) -> Verdict:
    if rho_value <= thresholds.rho and delta_p <= thresholds.delta:
        return Verdict.SIMILAR
    return Verdict.DISSIMILAR


@dataclass(frozen=True)
class ComparisonReport:
    """Both signatures of a structure pair and the resulting verdict."""
    ids: tuple[str, str]
    d_p: tuple[float, float]
    rho: float
    profile: GeodesicProfile
    verdict: Verdict
    thresholds: Thresholds
    method1: Method1Params
    method2: Method2Params

    @property
    def delta_p(self) -> int:
        return self.profile.delta_p


def compare(
    model_a: StructureModel,
    model_b: StructureModel,
    m1: Method1Params = Method1Params(),
    m2: Method2Params = Method2Params(),
    thresholds: Thresholds = Thresholds(),
    threads: int = 1,
    cache: Optional["SignatureCache"] = None,
    labels: Optional[tuple[str, str]] = None,
) -> ComparisonReport:
    """Compute D_p for both models, rho, the geodesic profile and the verdict."""
    sig_a = signature_for(model_a, m1, threads, cache)
    sig_b = signature_for(model_b, m1, threads, cache)
    rho_value = rho(sig_a, sig_b)
    profile = geodesic_profile(model_a, model_b, m2, threads)
    verdict = verdict_for(rho_value, profile.delta_p, thresholds)
    ids = labels or (model_a.pdb_id, model_b.pdb_id)
    logger.info(f"{ids[0]} vs {ids[1]}: rho={rho_value:.6f} delta_p={profile.delta_p} -> {verdict.value}")
    return ComparisonReport(
        ids=ids,
        d_p=(sig_a.d_p, sig_b.d_p),
        rho=rho_value,
        profile=profile,
        verdict=verdict,
        thresholds=thresholds,
        method1=m1,
        method2=m2,
    )


def rank_pairs(reports: Iterable[ComparisonReport]) -> list[ComparisonReport]:
    """Most similar first: similar verdicts, then ascending rho, then delta_p."""
    return sorted(reports, key=lambda r: (r.verdict != Verdict.SIMILAR, r.rho, r.delta_p))
