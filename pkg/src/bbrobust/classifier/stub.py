"""Fixture-driven classification server speaking the v1 wire protocol.

Responses are looked up by image digest in a fixture mapping; unknown images
get the ``"default"`` entry, or a reference-model prediction when a model is
attached. Fault injection (``fail_status``/``fail_count``, ``malformed``) exists
for client tests.
"""

from __future__ import annotations

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..imgcore import decode_image, image_digest
from .reference import RefModel, predict_reference
from .remote import CLASSIFY_PATH


class StubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address=("127.0.0.1", 0), fixture: dict | None = None,
                 model: RefModel | None = None):
        super().__init__(address, _Handler)
        self.fixture = dict(fixture or {})
        self.model = model
        self.fail_status = None
        self.fail_count = 0  # negative = fail forever
        self.malformed = False
        self.calls = 0
        self._lock = threading.Lock()
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def respond(self, img, top_k: int) -> dict:
        entry = self.fixture.get(image_digest(img))
        if entry is None and self.model is not None:
            entry = {"labels": [
                {"name": lab.name, "confidence": lab.confidence}
                for lab in predict_reference(self.model, img).labels
            ]}
        if entry is None:
            entry = self.fixture.get("default")
        if entry is None:
            entry = {"labels": [{"name": "unknown", "confidence": 1.0}]}
        return {"labels": list(entry["labels"])[:max(1, top_k)]}

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.serve_forever, kwargs={"poll_interval": 0.05},
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: StubServer

    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/stats":
            self._send(200, json.dumps({"calls": self.server.calls}).encode())
        else:
            self._send(404, b'{"error": "not found"}')

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        srv = self.server
        with srv._lock:
            srv.calls += 1
            failing = srv.fail_status is not None and srv.fail_count != 0
            if failing and srv.fail_count > 0:
                srv.fail_count -= 1
        if self.path != CLASSIFY_PATH:
            self._send(404, b'{"error": "not found"}')
            return
        if failing:
            self._send(srv.fail_status, b'{"error": "injected failure"}')
            return
        if srv.malformed:
            self._send(200, b'{"labels": "oops"')
            return
        try:
            req = json.loads(raw)
            img = decode_image(base64.b64decode(req["image_b64"], validate=True))
            top_k = int(req.get("top_k", 5))
        except Exception as exc:
            self._send(400, json.dumps({"error": str(exc)}).encode())
            return
        self._send(200, json.dumps(srv.respond(img, top_k)).encode())


def load_fixture(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("fixture must map image digests to responses")
    return doc
