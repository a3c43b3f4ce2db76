"""PDB ingestion: fixed-column parsing, cached fetching, point selection.

Environment Variables:
    MORPHOPROT_CACHE: Directory for downloaded structures (default: ~/.cache/morphoprot)
    MORPHOPROT_FETCH_URL: URL template with an {id} placeholder
"""
import hashlib
import logging
import math
import os
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import httpx
import numpy as np

from .constants import DEFAULT_FETCH_URL, FETCH_TIMEOUT_SECONDS, PDB_ID_PATTERN
from .errors import (
    EmptySelection,
    InvalidId,
    MalformedRecord,
    NetworkUnavailable,
    NoAtoms,
    NotFound,
)

logger = logging.getLogger(__name__)

_ID_RE = re.compile(PDB_ID_PATTERN)


class Selector(str, Enum):
    """Which atoms feed a pipeline."""
    ALL_ATOMS = "all_atoms"
    BACKBONE_CA = "backbone_ca"


class Frame(str, Enum):
    """Coordinate frame of a point cloud."""
    ANGSTROM = "angstrom"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class Atom:
    """One ATOM/HETATM record."""
    serial: int
    name: str
    residue_name: str
    chain_id: str
    residue_seq: int
    x: float
    y: float
    z: float
    is_hetero: bool = False

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class StructureModel:
    """Atoms of the first model of a structure, in file order."""
    pdb_id: str
    atoms: tuple[Atom, ...]

    def __len__(self) -> int:
        return len(self.atoms)

    def fingerprint(self) -> str:
        """Digest of atom names and coordinates; stable across runs."""
        h = hashlib.sha256()
        for atom in self.atoms:
            h.update(f"{atom.name}|{atom.is_hetero:d}|{atom.x!r}|{atom.y!r}|{atom.z!r};".encode())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class PointCloud:
    """(n, 3) float coordinates plus the frame they live in."""
    points: np.ndarray
    frame: Frame = Frame.ANGSTROM

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.frame == Frame.NORMALIZED and pts.size and np.abs(pts).max() > 1.0 + 1e-12:
            raise ValueError("normalized coordinates must lie in [-1, 1]")

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _field(line: str, start: int, end: int) -> str:
    """1-based inclusive fixed-column slice."""
    return line[start - 1:end]


def _int_or(value: str, fallback: int) -> int:
    try:
        return int(value)
    except ValueError:
        return fallback


def _parse_atom_line(line: str, line_number: int, ordinal: int) -> Atom:
    record = _field(line, 1, 6)
    coords = []
    for axis, (start, end) in zip("xyz", ((31, 38), (39, 46), (47, 54))):
        raw = _field(line, start, end).strip()
        try:
            value = float(raw)
        except ValueError:
            raise MalformedRecord(line_number, f"bad {axis} coordinate {raw!r}") from None
        if not math.isfinite(value):
            raise MalformedRecord(line_number, f"non-finite {axis} coordinate {raw!r}")
        coords.append(value)

    # Hybrid-36 serials (>99999) fall back to the running ordinal
    serial = _int_or(_field(line, 7, 11).strip(), ordinal)
    return Atom(
        serial=max(serial, 0),
        name=_field(line, 13, 16).strip(),
        residue_name=_field(line, 18, 20).strip(),
        chain_id=_field(line, 22, 22).strip(),
        residue_seq=_int_or(_field(line, 23, 26).strip(), 0),
        x=coords[0],
        y=coords[1],
        z=coords[2],
        is_hetero=record == "HETATM",
    )


def parse_pdb(
    text: Union[str, bytes],
    include_hetero: bool = False,
    pdb_id: Optional[str] = None,
) -> StructureModel:
    """Parse PDB-format text into a StructureModel.

    Only the first MODEL is read; an END record stops parsing. Alternate locations other than blank or
    'A' are skipped. The id comes from ``pdb_id``, else the HEADER record,
    else "local".

    Raises:
        NoAtoms: nothing parsable was found
        MalformedRecord: coordinate columns of an ATOM line are not numeric
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")

    header_id = None
    atoms: list[Atom] = []
    seen_model = False
    for line_number, line in enumerate(text.splitlines(), start=1):
        record = line[:6]
        if record.startswith("HEADER") and header_id is None:
            candidate = _field(line, 63, 66).strip().lower()
            if _ID_RE.fullmatch(candidate):
                header_id = candidate
            continue
        if record.startswith("MODEL"):
            if seen_model:
                break
            seen_model = True
            continue
        if record.startswith("ENDMDL") or record.rstrip() == "END":
            break
        if record not in ("ATOM  ", "HETATM"):
            continue
        if record == "HETATM" and not include_hetero:
            continue
        if _field(line, 17, 17) not in ("", " ", "A"):
            continue
        atoms.append(_parse_atom_line(line, line_number, len(atoms) + 1))

    if not atoms:
        raise NoAtoms("no ATOM/HETATM records found")

    model_id = pdb_id or header_id or "local"
    logger.debug(f"Parsed {len(atoms)} atoms for {model_id}")
    return StructureModel(pdb_id=model_id, atoms=tuple(atoms))


# ---------------------------------------------------------------------------
# Fetching
# ---------------------------------------------------------------------------

_fetch_locks: dict[str, threading.Lock] = {}
_fetch_locks_guard = threading.Lock()


def _lock_for(pdb_id: str) -> threading.Lock:
    with _fetch_locks_guard:
        return _fetch_locks.setdefault(pdb_id, threading.Lock())


def validate_id(pdb_id: str) -> str:
    """Return the lower-cased id or raise InvalidId."""
    if not isinstance(pdb_id, str) or not _ID_RE.fullmatch(pdb_id):
        raise InvalidId(f"not a PDB id: {pdb_id!r}")
    return pdb_id.lower()


def fetch_structure(
    pdb_id: str,
    cache_dir: Union[str, Path],
    url_template: Optional[str] = None,
    client: Optional[httpx.Client] = None,
    timeout: float = FETCH_TIMEOUT_SECONDS,
) -> str:
    """Return PDB text for ``pdb_id``, downloading into ``cache_dir`` on a miss.

    A cached id is never downloaded again. Writes are serialized per id.

    Raises:
        InvalidId: id does not match [0-9][A-Za-z0-9]{3}
        NetworkUnavailable: cache miss and the repository is unreachable
        NotFound: repository answered 404
    """
    key = validate_id(pdb_id)
    cache_path = Path(cache_dir).expanduser() / f"{key}.pdb"

    with _lock_for(key):
        if cache_path.exists() and cache_path.stat().st_size > 0:
            logger.info(f"Cache hit for {key}: {cache_path}")
            return cache_path.read_text(encoding="utf-8", errors="replace")

        template = url_template or os.getenv("MORPHOPROT_FETCH_URL") or DEFAULT_FETCH_URL
        url = template.format(id=key.upper())
        logger.info(f"Cache miss for {key}, downloading {url}")

        owns_client = client is None
        http = client or httpx.Client(timeout=timeout, follow_redirects=True)
        try:
            resp = http.get(url)
        except httpx.TransportError as e:
            raise NetworkUnavailable(f"cannot reach {url}: {e}") from e
        finally:
            if owns_client:
                http.close()

        if resp.status_code == 404:
            raise NotFound(f"{key} not found at {url}")
        if resp.status_code != 200:
            raise NetworkUnavailable(f"{url} answered HTTP {resp.status_code}")

        content = resp.text
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = cache_path.with_suffix(".pdb.part")
        tmp_path.write_text(content, encoding="utf-8")
        tmp_path.replace(cache_path)
        return content


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

def select_points(model: StructureModel, selector: Union[Selector, str] = Selector.ALL_ATOMS) -> PointCloud:
    """Coordinates of the selected atoms, in file order.

    Raises:
        EmptySelection: selector matched no atom
    """
    selector = Selector(selector)
    if selector == Selector.BACKBONE_CA:
        chosen = [a.xyz for a in model.atoms if a.name == "CA" and not a.is_hetero]
    else:
        chosen = [a.xyz for a in model.atoms]
    if not chosen:
        raise EmptySelection(f"selector {selector.value} matched no atoms in {model.pdb_id}")
    return PointCloud(np.asarray(chosen, dtype=np.float64), Frame.ANGSTROM)


def normalize(cloud: PointCloud) -> PointCloud:
    """Center on the centroid and scale uniformly so max |coordinate| is 1.

    A cloud that collapses to a single location maps to the origin.
    """
    if len(cloud) == 0:
        raise ValueError("cannot normalize an empty cloud")
    centered = cloud.points - cloud.points.mean(axis=0)
    extent = float(np.abs(centered).max())
    if extent == 0.0:
        return PointCloud(np.zeros_like(centered), Frame.NORMALIZED)
    scaled = np.clip(centered / extent, -1.0, 1.0)
    return PointCloud(scaled, Frame.NORMALIZED)
