"""Shared test doubles: local HTTP endpoints and scripted model stand-ins."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from simmark.embedding import synthetic_embed
from simmark.generation import LlmSamplingParams


@contextmanager
def http_endpoint(handler_fn):
    """Spin up a local HTTP server; ``handler_fn(method, path, payload)``
    returns (status, body_dict). Yields (base_url, request_log)."""
    request_log = []

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _serve(self, method):
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length).decode("utf-8") if length else ""
            payload = json.loads(raw) if raw else None
            request_log.append({"method": method, "path": self.path, "payload": payload,
                                "raw": raw})
            status, body = handler_fn(method, self.path, payload)
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            self._serve("POST")

        def do_GET(self):
            self._serve("GET")

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}", request_log
    finally:
        server.shutdown()
        server.server_close()


def embed_endpoint(dim: int = 16, seed: int = 0, fail_first: int = 0):
    """Handler serving synthetic embeddings over the wire protocol."""
    state = {"calls": 0}

    def handler(method, path, payload):
        state["calls"] += 1
        if state["calls"] <= fail_first:
            return 500, {"error": "transient"}
        if method == "POST" and path == "/v1/embed":
            vectors = [synthetic_embed(seed, t, dim).tolist() for t in payload["texts"]]
            return 200, {"vectors": vectors}
        return 404, {"error": "not found"}

    return handler, state


class ScriptedGenerator:
    """Generator returning canned completions in order (cycled)."""

    def __init__(self, completions: list[str]):
        self.completions = completions
        self.calls = 0
        self.served = 0

    def complete(self, prompt: str, params: LlmSamplingParams, n: int) -> list[str]:
        self.calls += 1
        out = []
        for _ in range(n):
            out.append(self.completions[self.served % len(self.completions)])
            self.served += 1
        return out


class WordSaladGenerator:
    """Deterministic pseudo-word sentences, unique per call."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.counter = 0

    def sentence(self) -> str:
        self.counter += 1
        n = int(self.rng.integers(5, 10))
        words = [f"w{int(self.rng.integers(0, 10_000_000))}" for _ in range(n)]
        return ("Tok" + str(self.counter) + " " + " ".join(words)).strip() + "."

    def complete(self, prompt, params, n):
        return [self.sentence() for _ in range(n)]


class IdentityParaphraser:
    def __init__(self):
        self.requests = []

    def paraphrase(self, sentence, context, n, prompt):
        self.requests.append({"sentence": sentence, "context": context, "n": n,
                              "prompt": prompt})
        return [sentence] * n


class ScrambleParaphraser:
    """Deterministic text perturbation: tags each candidate with its index."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def paraphrase(self, sentence, context, n, prompt):
        base = sentence.rstrip(".")
        return [f"{base} variant{self.seed}x{i}." for i in range(n)]
