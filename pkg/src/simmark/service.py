"""Stateless HTTP detection service.

POST /v1/detect {"text": ...} -> DetectionReport JSON (422 when the text is
too short for a confident verdict, report included in the body).
GET /v1/health -> {"status": "ok", ...provenance}.

Requests are independent; the detector config and embedder are immutable and
shared, so concurrent identical requests produce identical reports.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .detection import VERDICT_INCONCLUSIVE, DetectorConfig, detect
from .embedding import Embedder


def _make_handler(detector: DetectorConfig, embedder: Embedder, provenance: dict):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet; logs go to stderr elsewhere
            pass

        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/v1/health":
                self._reply(200, {"status": "ok", **provenance})
            else:
                self._reply(404, {"error": "not found"})

        def do_POST(self):
            if self.path != "/v1/detect":
                self._reply(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                text = payload["text"]
                if not isinstance(text, str):
                    raise TypeError("text must be a string")
            except (ValueError, KeyError, TypeError) as exc:
                self._reply(400, {"error": f"malformed request: {exc}"})
                return
            try:
                report = detect(detector, text, embedder)
            except Exception as exc:  # embedder/runtime failure
                self._reply(500, {"error": str(exc)})
                return
            status = 422 if report.verdict == VERDICT_INCONCLUSIVE else 200
            self._reply(status, report.to_dict())

    return Handler


def make_server(
    bind_addr: str,
    detector: DetectorConfig,
    embedder: Embedder,
    provenance: dict | None = None,
) -> ThreadingHTTPServer:
    host, _, port = bind_addr.rpartition(":")
    handler = _make_handler(detector, embedder, provenance or {})
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)


def serve(
    bind_addr: str,
    detector: DetectorConfig,
    embedder: Embedder,
    provenance: dict | None = None,
    background: bool = False,
) -> ThreadingHTTPServer:
    server = make_server(bind_addr, detector, embedder, provenance)
    if background:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
    else:
        server.serve_forever()
    return server
