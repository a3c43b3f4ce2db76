"""Signature cache keyed by structure and Method 1 parameters."""
import hashlib
import json
import logging
from pathlib import Path
from threading import Lock
from typing import Callable, Optional, Union

from .ingest import StructureModel
from .pipelines import FractalSignature, Method1Params

logger = logging.getLogger(__name__)


def params_key(model: StructureModel, params: Method1Params) -> str:
    """Stable hex key over the structure id, its coordinates and the params."""
    payload = json.dumps(
        {"pdb_id": model.pdb_id, "atoms": model.fingerprint(), "params": params.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class SignatureCache:
    """In-memory signature cache with optional JSON persistence.

    Lookups and inserts are serialized by a lock; the signature itself is
    computed outside it so independent structures do not wait on each other.

    Usage:
        cache = SignatureCache(Path("~/.cache/morphoprot/signatures"))
        sig = cache.get_or_compute(model, params, lambda: fractal_signature(model, params))
    """

    def __init__(self, directory: Optional[Union[str, Path]] = None):
        self.directory = Path(directory).expanduser() if directory else None
        self._entries: dict[str, FractalSignature] = {}
        self._lock = Lock()
        self.hits = 0
        self.misses = 0
        self.computations = 0

    def _path(self, key: str) -> Optional[Path]:
        return self.directory / f"{key}.json" if self.directory else None

    def _load(self, key: str) -> Optional[FractalSignature]:
        path = self._path(key)
        if path is None or not path.exists():
            return None
        try:
            return FractalSignature.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, KeyError, TypeError) as e:
            logger.warning(f"Ignoring unreadable cache entry {path}: {e}")
            return None

    def _store(self, key: str, signature: FractalSignature) -> None:
        path = self._path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.part")
        tmp.write_text(json.dumps(signature.to_dict(), sort_keys=True), encoding="utf-8")
        tmp.replace(path)

    def get(self, model: StructureModel, params: Method1Params) -> Optional[FractalSignature]:
        key = params_key(model, params)
        with self._lock:
            signature = self._entries.get(key)
            if signature is None:
                signature = self._load(key)
                if signature is not None:
                    self._entries[key] = signature
            if signature is not None:
                self.hits += 1
            return signature

    def get_or_compute(
        self,
        model: StructureModel,
        params: Method1Params,
        compute: Callable[[], FractalSignature],
    ) -> FractalSignature:
        cached = self.get(model, params)
        if cached is not None:
            logger.info(f"Signature cache hit for {model.pdb_id}")
            return cached

        signature = compute()
        key = params_key(model, params)
        with self._lock:
            self.misses += 1
            self.computations += 1
            self._entries.setdefault(key, signature)
            self._store(key, signature)
            return self._entries[key]

    def stats(self) -> dict:
        with self._lock:
            return {
                "hits": self.hits,
                "misses": self.misses,
                "computations": self.computations,
                "entries": len(self._entries),
            }

    def clear(self) -> None:
        """Forget in-memory entries and counters; files on disk are kept."""
        with self._lock:
            self._entries.clear()
            self.hits = self.misses = self.computations = 0
