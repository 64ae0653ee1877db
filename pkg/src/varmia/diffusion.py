"""Noise schedules, forward noising and the DDIM / DDPM reverse steps.

Steps are 1-based: ``t`` runs over ``1..T`` and ``t = 0`` denotes clean data,
with ``alpha_bar(0) := 1``.  All arithmetic is carried out in float64;
callers that need the float32 image carrier cast at their own boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class Denoiser(Protocol):
    """Anything that predicts the injected noise from ``(x_t, t)``.

    ``predict`` accepts a single sample or a batch with a leading axis and
    must be a pure function of its inputs.
    """

    parameter_count: int

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)

    def abar(self, t: int) -> float:
        """``alpha_bar`` at step ``t`` with the clean-data convention at 0."""
        if t == 0:
            return 1.0
        return float(self.alpha_bar[t - 1])

    def check_step(self, t: int, *, allow_zero: bool = False) -> None:
        lo = 0 if allow_zero else 1
        if not (isinstance(t, (int, np.integer)) and lo <= t <= self.T):
            raise ValueError(f"step {t!r} outside [{lo}, {self.T}]")

    def to_dict(self) -> dict:
        return {"T": self.T, "beta_start": float(self.beta[0]),
                "beta_end": float(self.beta[-1])}


def build_schedule(T: int = 1000, beta_start: float = 1e-4,
                   beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule from ``beta_start`` to ``beta_end`` inclusive."""
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not (0.0 < beta_start < 1.0 and 0.0 < beta_end < 1.0):
        raise ValueError("betas must lie in (0, 1)")
    if beta_start > beta_end:
        raise ValueError("beta_start must not exceed beta_end")
    if T == 1:
        beta = np.array([beta_start], dtype=np.float64)
    else:
        beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    for arr in (beta, alpha, alpha_bar):
        arr.setflags(write=False)
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _as_f64(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def forward_noise(x, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """``sqrt(abar_t) * x + sqrt(1 - abar_t) * eps``."""
    sched.check_step(t)
    x = _as_f64(x, "x")
    eps = _as_f64(eps, "eps")
    if x.shape != eps.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs eps {eps.shape}")
    ab = sched.abar(t)
    return np.sqrt(ab) * x + np.sqrt(1.0 - ab) * eps


def ddim_step(x_t, t: int, t_prev: int, model: Denoiser,
              sched: NoiseSchedule) -> np.ndarray:
    """Deterministic DDIM jump from step ``t`` to ``t_prev``."""
    sched.check_step(t)
    sched.check_step(t_prev, allow_zero=True)
    if t_prev >= t:
        raise ValueError(f"t_prev={t_prev} must be smaller than t={t}")
    x_t = _as_f64(x_t, "x_t")
    eps = np.asarray(model.predict(x_t, t), dtype=np.float64)
    if eps.shape != x_t.shape:
        raise ValueError(f"model returned shape {eps.shape}, expected {x_t.shape}")
    ab, ab_prev = sched.abar(t), sched.abar(t_prev)
    x0 = (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
    return np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps


def sampling_steps(t: int, k: int) -> list[int]:
    """The visited steps ``t, t-k, ..., 0`` (the last jump may be shorter)."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"sampling interval must be >= 1, got {k!r}")
    if k > t:
        raise ValueError(f"sampling interval {k} exceeds step {t}")
    steps = list(range(t, 0, -k))
    steps.append(0)
    return steps


def ddim_sample(x_t, t: int, k: int, model: Denoiser,
                sched: NoiseSchedule) -> np.ndarray:
    """Denoise ``x_t`` to step 0 with DDIM jumps of size ``k``."""
    sched.check_step(t)
    steps = sampling_steps(t, k)
    x = _as_f64(x_t, "x_t")
    for cur, nxt in zip(steps[:-1], steps[1:]):
        x = ddim_step(x, cur, nxt, model, sched)
    return x


def ddpm_step(x_t, t: int, model: Denoiser, sched: NoiseSchedule,
              noise) -> np.ndarray:
    """Ancestral step with variance fixed to ``beta_t``; no noise at ``t = 1``."""
    sched.check_step(t)
    x_t = _as_f64(x_t, "x_t")
    noise = _as_f64(noise, "noise")
    if noise.shape != x_t.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs noise {noise.shape}")
    eps = np.asarray(model.predict(x_t, t), dtype=np.float64)
    a, b, ab = sched.alpha[t - 1], sched.beta[t - 1], sched.abar(t)
    mean = (x_t - (b / np.sqrt(1.0 - ab)) * eps) / np.sqrt(a)
    if t == 1:
        return mean
    return mean + np.sqrt(b) * noise


# --------------------------------------------------------------------------
# closed-form denoisers
# --------------------------------------------------------------------------

class MemorizedDenoiser:
    """Optimal noise predictor for an empirical distribution over ``points``.

    With a single point the prediction inverts the forward process exactly.
    With several points it is the posterior-weighted mixture of the
    single-point predictions.
    """

    parameter_count = 0

    def __init__(self, points, sched: NoiseSchedule):
        pts = _as_f64(points, "points")
        if pts.ndim < 1 or pts.shape[0] == 0:
            raise ValueError("memorized denoiser needs at least one point")
        self.points = pts
        self.sample_shape = pts.shape[1:]
        self.sched = sched
        self._flat = pts.reshape(len(pts), -1)

    def predict(self, x_t, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        ab = self.sched.abar(t)
        s, r = np.sqrt(ab), np.sqrt(1.0 - ab)
        batched = x_t.shape != self.sample_shape
        xf = x_t.reshape(-1, self._flat.shape[1])
        if len(self._flat) == 1:
            out = (xf - s * self._flat[0]) / r
        else:
            # (batch, points)
            sq = ((xf[:, None, :] - s * self._flat[None, :, :]) ** 2).sum(-1)
            logw = -sq / (2.0 * (1.0 - ab))
            logw -= logw.max(axis=1, keepdims=True)
            w = np.exp(logw)
            w /= w.sum(axis=1, keepdims=True)
            out = (xf - s * (w @ self._flat)) / r
        return out.reshape(x_t.shape) if batched else out.reshape(self.sample_shape)


class GaussianDenoiser:
    """Optimal noise predictor when the data are ``N(mean, var * I)``."""

    parameter_count = 0

    def __init__(self, mean, var: float, sched: NoiseSchedule):
        if not var > 0:
            raise ValueError("variance must be positive")
        self.mean = _as_f64(mean, "mean")
        self.var = float(var)
        self.sched = sched

    def predict(self, x_t, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        ab = self.sched.abar(t)
        return (np.sqrt(1.0 - ab) * (x_t - np.sqrt(ab) * self.mean)
                / (ab * self.var + 1.0 - ab))


def oracle_denoiser(kind: str, sched: NoiseSchedule, *, points=None,
                    mean=None, var: float | None = None) -> Denoiser:
    """Build a closed-form stand-in for a perfectly trained model.

    ``kind`` is ``"memorized"`` (needs ``points``) or ``"gaussian"``
    (needs ``mean`` and ``var``).
    """
    if kind == "memorized":
        if points is None:
            raise ValueError("memorized oracle needs points")
        return MemorizedDenoiser(points, sched)
    if kind == "gaussian":
        if mean is None or var is None:
            raise ValueError("gaussian oracle needs mean and var")
        return GaussianDenoiser(mean, var, sched)
    raise ValueError(f"unknown oracle kind {kind!r}")
