"""HTTP server exposing the three wire protocols with a bounded inference gate.

400 on malformed bodies, 503 when the requested capability has no backend
loaded. Embedding requests larger than max_batch are processed in chunks
behind a concurrency semaphore so one giant request cannot starve the rest.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .backends import build_embed_backend, build_generate_backend, build_paraphrase_backend
from .config import ShimConfig


class _BadRequest(Exception):
    pass


def _require(payload: dict, key: str, kind, predicate=None):
    if not isinstance(payload, dict) or key not in payload:
        raise _BadRequest(f"missing field {key!r}")
    value = payload[key]
    if not isinstance(value, kind):
        raise _BadRequest(f"field {key!r} has wrong type")
    if predicate is not None and not predicate(value):
        raise _BadRequest(f"field {key!r} failed validation")
    return value


def _make_handler(cfg: ShimConfig, embed_backend, gen_backend, para_backend):
    gate = threading.Semaphore(cfg.max_concurrent)

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
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
                self._reply(200, {
                    "status": "ok",
                    "models": {
                        "embed": getattr(embed_backend, "model_id", None),
                        "generate": getattr(gen_backend, "model_id", None),
                        "paraphrase": getattr(para_backend, "model_id", None),
                    },
                })
            else:
                self._reply(404, {"error": "not found"})

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._reply(400, {"error": "body is not valid JSON"})
                return
            try:
                if self.path == "/v1/embed":
                    self._handle_embed(payload)
                elif self.path == "/v1/generate":
                    self._handle_generate(payload)
                elif self.path == "/v1/paraphrase":
                    self._handle_paraphrase(payload)
                else:
                    self._reply(404, {"error": "not found"})
            except _BadRequest as exc:
                self._reply(400, {"error": str(exc)})
            except Exception as exc:  # backend failure
                self._reply(500, {"error": str(exc)})

        def _handle_embed(self, payload):
            if embed_backend is None:
                self._reply(503, {"error": "no embedding model loaded"})
                return
            texts = _require(
                payload, "texts", list,
                lambda ts: len(ts) > 0 and all(isinstance(t, str) and t for t in ts),
            )
            instruction = payload.get("instruction", "")
            if not isinstance(instruction, str):
                raise _BadRequest("field 'instruction' has wrong type")
            chunks = []
            for i in range(0, len(texts), cfg.max_batch):
                with gate:
                    chunks.append(embed_backend.embed(instruction, texts[i:i + cfg.max_batch]))
            vectors = np.vstack(chunks)
            self._reply(200, {"vectors": vectors.tolist()})

        def _handle_generate(self, payload):
            if gen_backend is None:
                self._reply(503, {"error": "no generation model loaded"})
                return
            prompt = _require(payload, "prompt", str, lambda p: bool(p))
            n = payload.get("n", 1)
            if not isinstance(n, int) or n < 1:
                raise _BadRequest("field 'n' must be a positive integer")
            temperature = float(payload.get("temperature", 0.7))
            repetition_penalty = float(payload.get("repetition_penalty", 1.0))
            min_new = int(payload.get("min_new_tokens", 1))
            max_new = int(payload.get("max_new_tokens", max(min_new, 64)))
            if min_new > max_new:
                raise _BadRequest("min_new_tokens exceeds max_new_tokens")
            seed = payload.get("seed")
            with gate:
                completions = gen_backend.generate(
                    prompt, temperature, repetition_penalty, min_new, max_new, n,
                    seed=seed,
                )
            self._reply(200, {"completions": completions})

        def _handle_paraphrase(self, payload):
            if para_backend is None:
                self._reply(503, {"error": "no paraphrase model loaded"})
                return
            sentence = _require(payload, "sentence", str, lambda s: bool(s))
            context = payload.get("context", "")
            if not isinstance(context, str):
                raise _BadRequest("field 'context' has wrong type")
            n = payload.get("n", 1)
            if not isinstance(n, int) or n < 1:
                raise _BadRequest("field 'n' must be a positive integer")
            with gate:
                candidates = para_backend.paraphrase(sentence, context, n,
                                                     seed=payload.get("seed"))
            self._reply(200, {"candidates": candidates})

    return Handler


def make_server(cfg: ShimConfig) -> ThreadingHTTPServer:
    embed_backend = build_embed_backend(cfg.embed_model_id, cfg.device, cfg.embed_dim)
    gen_backend = build_generate_backend(cfg.gen_model_id, cfg.device)
    para_backend = build_paraphrase_backend(cfg.para_model_id, cfg.device)
    host, _, port = cfg.bind_addr.rpartition(":")
    handler = _make_handler(cfg, embed_backend, gen_backend, para_backend)
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)


def serve(cfg: ShimConfig, background: bool = False) -> ThreadingHTTPServer:
    server = make_server(cfg)
    if background:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
    else:
        server.serve_forever()
    return server
