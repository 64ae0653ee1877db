"""Loopback HTTP service exposing a local model as a variation API.

    POST /v1/variation  {"image": b64 TNSR, "t": int?, "seed": int?, "latent": bool?}
    GET  /v1/health     {"status": "ok", "T": int}
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import os
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .diffusion import NoiseSchedule
from .tensor_io import TensorFormatError, decode_tensor, encode_tensor
from .variation import default_interval, variation_latent, variation_local

log = logging.getLogger(__name__)

_U64_MAX = (1 << 64) - 1


class BadRequest(ValueError):
    pass


class VariationService:
    """Request validation and dispatch, independent of the HTTP layer."""

    def __init__(self, model, sched: NoiseSchedule, default_k: int | None = None,
                 default_t: int | None = None, codec=None):
        self.model = model
        self.sched = sched
        self.default_k = default_k
        self.default_t = default_t if default_t is not None else max(1, sched.T // 5)
        self.codec = codec

    def health(self) -> dict:
        return {"status": "ok", "T": self.sched.T}

    def interval(self, t: int) -> int:
        k = self.default_k if self.default_k is not None else default_interval(t)
        return max(1, min(int(k), t))

    def vary(self, body) -> dict:
        if not isinstance(body, dict):
            raise BadRequest("request body must be a JSON object")
        unknown = set(body) - {"image", "t", "seed", "latent"}
        if unknown:
            raise BadRequest(f"unknown fields {sorted(unknown)}")
        t = body.get("t", self.default_t)
        if isinstance(t, bool) or not isinstance(t, int):
            raise BadRequest("t must be an integer")
        if not 1 <= t <= self.sched.T:
            raise BadRequest(f"t={t} out of range: must satisfy 1 <= t <= T={self.sched.T}")
        seed = body.get("seed")
        if seed is None:
            seed = int.from_bytes(os.urandom(8), "little")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= _U64_MAX:
            raise BadRequest("seed must be an unsigned 64-bit integer")
        latent = body.get("latent", False)
        if not isinstance(latent, bool):
            raise BadRequest("latent must be a boolean")
        try:
            x = decode_tensor(base64.b64decode(body["image"], validate=True))
        except KeyError:
            raise BadRequest("missing image") from None
        except (binascii.Error, TypeError, TensorFormatError) as err:
            raise BadRequest(f"bad image payload: {err}") from None
        k = self.interval(t)
        if latent:
            if self.codec is None:
                raise BadRequest("this server has no latent codec")
            if tuple(x.shape) != tuple(self.codec.sample_shape):
                raise BadRequest(f"image shape {x.shape} != {tuple(self.codec.sample_shape)}")
            out = variation_latent(self.model, self.sched, self.codec, x, t, k, seed)
        else:
            expected = getattr(self.model, "sample_shape", None)
            if expected is not None and tuple(x.shape) != tuple(expected):
                raise BadRequest(f"image shape {x.shape} != {tuple(expected)}")
            out = variation_local(self.model, self.sched, x, t, k, seed)
        return {"image": base64.b64encode(encode_tensor(out)).decode()}


class _Handler(BaseHTTPRequestHandler):
    service: VariationService  # set on the subclass built by make_server
    protocol_version = "HTTP/1.1"

    def _send(self, status: int, payload: dict) -> None:
        raw = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, self.service.health())
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        if self.path != "/v1/variation":
            self._send(404, {"error": f"no route {self.path}"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"null")
            self._send(200, self.service.vary(body))
        except (BadRequest, ValueError) as err:
            self._send(400, {"error": str(err)})
        except Exception as err:  # pragma: no cover - defensive
            log.exception("variation failed")
            self._send(500, {"error": f"internal error: {err}"})

    def log_message(self, fmt, *args):
        log.info("%s %s", self.address_string(), fmt % args)


def make_server(service: VariationService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    """Bind (port 0 picks a free one) without starting the serve loop."""
    handler = type("VariationHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def start_background(service: VariationService, host: str = "127.0.0.1",
                     port: int = 0) -> tuple[ThreadingHTTPServer, str]:
    """Serve from a daemon thread; returns the server and its base URL."""
    server = make_server(service, host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"


def serve_variation_api(model_path, sched: NoiseSchedule | None = None,
                        bind: str = "127.0.0.1:8765", default_k: int | None = None,
                        default_t: int | None = None, codec_path=None) -> None:
    """Load a checkpoint and serve until SIGINT/SIGTERM."""
    from .denoiser import MlpDenoiser
    from .variation import LinearCodec

    model = MlpDenoiser.load(model_path)
    sched = sched or model.sched
    codec = LinearCodec.load(codec_path) if codec_path else None
    host, _, port = bind.rpartition(":")
    server = make_server(VariationService(model, sched, default_k, default_t, codec),
                         host or "127.0.0.1", int(port))

    def _stop(signum, frame):
        log.info("signal %d, shutting down", signum)
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, _stop)
    signal.signal(signal.SIGTERM, _stop)
    log.info("serving variation API on %s:%d (T=%d)", *server.server_address[:2], sched.T)
    try:
        server.serve_forever()
    finally:
        server.server_close()
