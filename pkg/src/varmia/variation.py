"""The black-box variation API: noise an image to step ``t``, denoise it back.

Three endpoints share one tiny interface, ``vary(x, t, seed) -> image``:
``LocalEndpoint`` (pixel-space DDIM), ``LatentEndpoint`` (encode, vary in
latent space, decode) and ``RemoteEndpoint`` (HTTP client for the bundled
server).  Outputs are always float32 images, which is what goes over the
wire, so local and remote results can be compared bit for bit.
"""

from __future__ import annotations

import base64
import json
import socket
import threading
import urllib.error
import urllib.request
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .diffusion import Denoiser, NoiseSchedule, ddim_sample, forward_noise
from .seeding import derive_seed  # noqa: F401  re-exported for API users
from .tensor_io import (TensorFormatError, decode_tensor, encode_tensor, load_tensor,
                        save_tensor)


@runtime_checkable
class VariationEndpoint(Protocol):
    def vary(self, x: np.ndarray, t: int, seed: int) -> np.ndarray: ...


def default_interval(t: int) -> int:
    """Server-side sampling interval when the caller does not pick one."""
    return max(1, int(t) // 2)


def _noise(seed: int, shape) -> np.ndarray:
    return np.random.default_rng(int(seed)).standard_normal(shape)


def variation_local(model: Denoiser, sched: NoiseSchedule, x, t: int, k: int,
                    seed: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x_t = forward_noise(x, t, _noise(seed, x.shape), sched)
    return ddim_sample(x_t, t, k, model, sched).astype(np.float32)


class LocalEndpoint:
    def __init__(self, model: Denoiser, sched: NoiseSchedule, k: int | None = None):
        self.model = model
        self.sched = sched
        self.k = k

    def vary(self, x, t: int, seed: int) -> np.ndarray:
        k = self.k if self.k is not None else default_interval(t)
        return variation_local(self.model, self.sched, x, t, min(k, t), seed)


# --------------------------------------------------------------------------
# latent variation
# --------------------------------------------------------------------------

class IdentityCodec:
    """Pass-through codec; latent variation then reduces to pixel variation."""

    roundtrip_error = 0.0

    def __init__(self, sample_shape):
        self.sample_shape = tuple(sample_shape)
        self.latent_dim = int(np.prod(self.sample_shape))

    def encode(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def decode(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64).reshape(self.sample_shape)


class LinearCodec:
    """Least-squares linear autoencoder (principal subspace of the fit data).

    ``roundtrip_error`` is the largest L2 reconstruction error over the fit
    samples, measured once at construction.
    """

    def __init__(self, mean, basis, sample_shape):
        # held at f32 precision so a saved codec reloads exactly
        self.mean = np.asarray(mean, dtype=np.float32).astype(np.float64)
        self.basis = np.ascontiguousarray(  # (pixels, latent)
            np.asarray(basis, dtype=np.float32), dtype=np.float64)
        self.sample_shape = tuple(int(s) for s in sample_shape)
        self.latent_dim = self.basis.shape[1]
        self.roundtrip_error = float("nan")

    @classmethod
    def fit(cls, samples, latent_dim: int) -> "LinearCodec":
        X = np.asarray(samples, dtype=np.float64)
        flat = X.reshape(len(X), -1)
        if not 1 <= latent_dim <= flat.shape[1]:
            raise ValueError(f"latent_dim must be in [1, {flat.shape[1]}]")
        mean = flat.mean(axis=0)
        _, _, vt = np.linalg.svd(flat - mean, full_matrices=False)
        basis = vt[:latent_dim].T
        if basis.shape[1] < latent_dim:
            pad = np.zeros((flat.shape[1], latent_dim - basis.shape[1]))
            basis = np.concatenate([basis, pad], axis=1)
        codec = cls(mean, basis, X.shape[1:])
        codec.roundtrip_error = codec.measure_roundtrip(X)
        return codec

    def measure_roundtrip(self, samples) -> float:
        errs = [np.linalg.norm(self.decode(self.encode(s)) - s) for s in samples]
        return float(max(errs))

    def encode(self, x) -> np.ndarray:
        flat = np.asarray(x, dtype=np.float64).reshape(-1)
        return (flat - self.mean) @ self.basis

    def decode(self, z) -> np.ndarray:
        flat = self.mean + self.basis @ np.asarray(z, dtype=np.float64)
        return flat.reshape(self.sample_shape)

    def save(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "codec.json").write_text(json.dumps(
            {"type": "linear_codec", "sample_shape": list(self.sample_shape),
             "latent_dim": self.latent_dim,
             "roundtrip_error": self.roundtrip_error}))
        save_tensor(out / "codec_mean.tnsr", self.mean)
        save_tensor(out / "codec_basis.tnsr", self.basis)

    @classmethod
    def load(cls, directory) -> "LinearCodec":
        src = Path(directory)
        meta = json.loads((src / "codec.json").read_text())
        codec = cls(load_tensor(src / "codec_mean.tnsr"),
                    load_tensor(src / "codec_basis.tnsr"), meta["sample_shape"])
        codec.roundtrip_error = meta["roundtrip_error"]
        return codec


def _model_input_dim(model) -> int | None:
    if hasattr(model, "input_dim"):
        return int(model.input_dim)
    if hasattr(model, "sample_shape"):
        return int(np.prod(model.sample_shape))
    return None


def variation_latent(model: Denoiser, sched: NoiseSchedule, codec, x, t: int,
                     k: int, seed: int) -> np.ndarray:
    dim = _model_input_dim(model)
    if dim is not None and dim != codec.latent_dim:
        raise ValueError(f"codec latent_dim {codec.latent_dim} does not match "
                         f"model input dim {dim}")
    z = codec.encode(x)
    z_t = forward_noise(z, t, _noise(seed, z.shape), sched)
    z_hat = ddim_sample(z_t, t, k, model, sched)
    return np.asarray(codec.decode(z_hat)).astype(np.float32)


class LatentEndpoint:
    def __init__(self, model: Denoiser, sched: NoiseSchedule, codec,
                 k: int | None = None):
        self.model, self.sched, self.codec, self.k = model, sched, codec, k

    def vary(self, x, t: int, seed: int) -> np.ndarray:
        k = self.k if self.k is not None else default_interval(t)
        return variation_latent(self.model, self.sched, self.codec, x, t,
                                min(k, t), seed)


# --------------------------------------------------------------------------
# remote client
# --------------------------------------------------------------------------

class RemoteError(RuntimeError):
    """Base class; ``phase`` names where the exchange failed."""

    phase = "remote"

    def __init__(self, message: str):
        super().__init__(f"[{self.phase}] {message}")


class RemoteConnectionError(RemoteError):
    phase = "connect"


class RemoteTimeoutError(RemoteError):
    phase = "timeout"


class RemoteRejectedError(RemoteError):
    phase = "rejected"


class RemoteStatusError(RemoteError):
    phase = "status"


class RemotePayloadError(RemoteError):
    phase = "payload"


def _post_json(url: str, body: dict, timeout_s: float) -> dict:
    req = urllib.request.Request(url, data=json.dumps(body).encode(),
                                 headers={"Content-Type": "application/json"},
                                 method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout_s) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as err:
        detail = err.read().decode(errors="replace")
        try:
            detail = json.loads(detail).get("error", detail)
        except (ValueError, AttributeError):
            pass
        if err.code == 400:
            raise RemoteRejectedError(f"remote rejected parameters: {detail}") from None
        raise RemoteStatusError(f"HTTP {err.code}: {detail}") from None
    except (socket.timeout, TimeoutError) as err:
        raise RemoteTimeoutError(f"no response within {timeout_s:.3f}s") from err
    except urllib.error.URLError as err:
        if isinstance(err.reason, (socket.timeout, TimeoutError)):
            raise RemoteTimeoutError(f"no response within {timeout_s:.3f}s") from err
        raise RemoteConnectionError(str(err.reason)) from err
    except (ConnectionError, OSError) as err:
        raise RemoteConnectionError(str(err)) from err
    try:
        return json.loads(raw)
    except ValueError as err:
        raise RemotePayloadError(f"response is not JSON: {err}") from err


def variation_remote(endpoint_url: str, x, t: int | None, seed: int | None = None,
                     timeout_ms: int = 10_000, latent: bool = False) -> np.ndarray:
    body: dict = {"image": base64.b64encode(encode_tensor(np.asarray(x, np.float32))).decode(),
                  "latent": bool(latent)}
    if t is not None:
        body["t"] = int(t)
    if seed is not None:
        body["seed"] = int(seed)
    url = endpoint_url.rstrip("/") + "/v1/variation"
    reply = _post_json(url, body, timeout_ms / 1000.0)
    try:
        out = decode_tensor(base64.b64decode(reply["image"], validate=True))
    except (KeyError, TypeError, ValueError, TensorFormatError) as err:
        raise RemotePayloadError(f"malformed image payload: {err}") from err
    if out.shape != np.shape(x):
        raise RemotePayloadError(f"shape {out.shape} differs from request {np.shape(x)}")
    return out


class RemoteEndpoint:
    def __init__(self, url: str, timeout_ms: int = 10_000, latent: bool = False,
                 max_in_flight: int = 8):
        self.url = url
        self.timeout_ms = timeout_ms
        self.latent = latent
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def vary(self, x, t: int, seed: int) -> np.ndarray:
        with self._slots:
            return variation_remote(self.url, x, t, seed, self.timeout_ms, self.latent)

    def health(self) -> dict:
        try:
            with urllib.request.urlopen(self.url.rstrip("/") + "/v1/health",
                                        timeout=self.timeout_ms / 1000.0) as resp:
                return json.loads(resp.read())
        except (socket.timeout, TimeoutError) as err:
            raise RemoteTimeoutError("health check timed out") from err
        except (urllib.error.URLError, OSError) as err:
            raise RemoteConnectionError(str(err)) from err
