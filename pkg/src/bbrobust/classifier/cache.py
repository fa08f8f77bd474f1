"""Persistent on-disk cache of classification responses."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path

from ..imgcore import canonical_bytes
from .remote import PROTOCOL_VERSION
from .types import Classification, ClassifierError

log = logging.getLogger(__name__)


class CacheCorrupt(ClassifierError):
    pass


def cache_key(img, backend_id: str, protocol: str = PROTOCOL_VERSION) -> str:
    h = hashlib.sha256()
    for part in (canonical_bytes(img), backend_id.encode(), protocol.encode()):
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    return h.hexdigest()


def _checksum(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class ResponseCache:
    """One JSON file per key, each carrying a checksum of its payload.

    Writes go through a temp file and ``os.replace`` so concurrent readers never
    see partial entries; concurrent writers of one key are last-write-wins.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def _read(self, key: str) -> Classification | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text())
            if doc.get("checksum") != _checksum(doc["value"]):
                raise CacheCorrupt("checksum mismatch")
            return Classification.from_dict(doc["value"])
        except (CacheCorrupt, ValueError, KeyError, TypeError, ClassifierError) as exc:
            raise CacheCorrupt(f"{path}: {exc}") from exc

    def get(self, key: str) -> Classification | None:
        """Stored value, or ``None`` on a miss. Corrupt entries count as misses."""
        try:
            return self._read(key)
        except CacheCorrupt as exc:
            log.warning("ignoring corrupt cache entry: %s", exc)
            return None

    def put(self, key: str, value: Classification) -> None:
        payload = value.to_dict()
        doc = {"key": key, "value": payload, "checksum": _checksum(payload)}
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
        os.replace(tmp, path)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json"))


def cache_get(cache: ResponseCache, key: str) -> Classification | None:
    return cache.get(key)


def cache_put(cache: ResponseCache, key: str, value: Classification) -> None:
    cache.put(key, value)


class CachedBackend:
    """Wraps a backend; hits are served from disk without calling it."""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def classify(self, img) -> Classification:
        key = cache_key(img, self.backend_id)
        hit = self.cache.get(key)
        if hit is not None:
            with self._lock:
                self.hits += 1
            return hit
        value = self.inner.classify(img)
        self.cache.put(key, value)
        with self._lock:
            self.misses += 1
        return value
