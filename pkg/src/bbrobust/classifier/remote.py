"""HTTP client for black-box classification services.

Wire protocol: ``POST /v1/classify`` with JSON ``{"image_b64": ..., "top_k": ...}``
(base64 PNG bytes); a 200 response carries ``{"labels": [{"name", "confidence"}]}``.
"""

from __future__ import annotations

import base64
import json
import logging
import threading
import time

import requests

from ..imgcore import encode_image
from .types import Classification, NetworkError, ProtocolError, Unavailable

PROTOCOL_VERSION = "v1"
CLASSIFY_PATH = "/v1/classify"

log = logging.getLogger(__name__)

_inflight: dict[str, threading.BoundedSemaphore] = {}
_inflight_lock = threading.Lock()


def _semaphore(endpoint: str, limit: int) -> threading.BoundedSemaphore:
    with _inflight_lock:
        sem = _inflight.get(endpoint)
        if sem is None:
            sem = _inflight[endpoint] = threading.BoundedSemaphore(limit)
        return sem


def request_envelope(img, top_k: int = 5) -> dict:
    return {"image_b64": base64.b64encode(encode_image(img, "png")).decode("ascii"), "top_k": top_k}


def parse_response(body: bytes | str, backend_id: str, latency_ms: float = 0.0) -> Classification:
    try:
        doc = json.loads(body)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("labels"), list):
        raise ProtocolError("response lacks a 'labels' list")
    for item in doc["labels"]:
        if not isinstance(item, dict) or not isinstance(item.get("name"), str):
            raise ProtocolError(f"malformed label entry {item!r}")
        conf = item.get("confidence")
        if isinstance(conf, bool) or not isinstance(conf, (int, float)):
            raise ProtocolError(f"non-numeric confidence in {item!r}")
    return Classification.from_dict(doc, backend_id, latency_ms)


class RemoteBackend:
    """Classifier reached over HTTP, with retry/backoff and an in-flight cap."""

    def __init__(self, endpoint: str, top_k: int = 5, timeout: float = 30.0,
                 attempts: int = 3, backoff_base: float = 0.5, max_inflight: int = 4,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.top_k = top_k
        self.timeout = timeout
        self.attempts = attempts
        self.backoff_base = backoff_base
        self.max_inflight = max_inflight
        self.backend_id = f"remote:{self.endpoint}"
        self._session = session or requests.Session()
        self._sem = _semaphore(self.endpoint, max_inflight)

    def classify(self, img) -> Classification:
        return remote_classify(self, img)


def remote_classify(backend: RemoteBackend, img) -> Classification:
    payload = json.dumps(request_envelope(img, backend.top_k))
    url = backend.endpoint + CLASSIFY_PATH
    last = None
    for attempt in range(backend.attempts):
        if attempt:
            time.sleep(backend.backoff_base * 2 ** (attempt - 1))
        start = time.monotonic()
        try:
            with backend._sem:
                resp = backend._session.post(
                    url, data=payload, timeout=backend.timeout,
                    headers={"Content-Type": "application/json"},
                )
        except (requests.Timeout, requests.ConnectionError) as exc:
            last = NetworkError(f"{url}: {exc}")
            log.warning("attempt %d/%d to %s failed: %s", attempt + 1, backend.attempts, url, exc)
            continue
        except requests.RequestException as exc:
            raise NetworkError(f"{url}: {exc}") from exc
        latency = (time.monotonic() - start) * 1000.0
        if resp.status_code >= 500:
            last = NetworkError(f"{url}: HTTP {resp.status_code}")
            log.warning("attempt %d/%d to %s: HTTP %d", attempt + 1, backend.attempts, url,
                        resp.status_code)
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"{url}: unexpected HTTP {resp.status_code}")
        return parse_response(resp.content, backend.backend_id, latency)
    raise Unavailable(f"{url} unavailable after {backend.attempts} attempts ({last})")
