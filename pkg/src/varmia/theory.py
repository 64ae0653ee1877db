"""Empirical checks of the single-jump reconstruction identity and of how
averaging n variations concentrates the reconstruction error."""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .diffusion import NoiseSchedule, ddim_sample, forward_noise
from .seeding import derive_seed
from .variation import LocalEndpoint, variation_local


def error_gain(sched: NoiseSchedule, t: int) -> float:
    """``sqrt(1 - abar_t) / sqrt(abar_t)``: noise error to pixel error."""
    ab = sched.abar(t)
    return float(np.sqrt(1.0 - ab) / np.sqrt(ab))


def identity_sides(model, sched: NoiseSchedule, x, t: int, eps):
    """Both sides of ``x_hat - x = gain * (eps - eps_theta(x_t, t))`` for k = t."""
    x = np.asarray(x, dtype=np.float64)
    x_t = forward_noise(x, t, eps, sched)
    lhs = ddim_sample(x_t, t, t, model, sched) - x
    rhs = error_gain(sched, t) * (eps - np.asarray(model.predict(x_t, t), np.float64))
    return lhs, rhs


def identity_check(model, sched: NoiseSchedule, x, t: int, trials: int = 10,
                   seed: int = 0) -> float:
    """Largest elementwise gap between the two sides over seeded trials."""
    worst = 0.0
    x = np.asarray(x, dtype=np.float64)
    for i in range(trials):
        eps = np.random.default_rng(derive_seed(seed, i, t)).standard_normal(x.shape)
        lhs, rhs = identity_sides(model, sched, x, t, eps)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


class ErrorLawDenoiser:
    """Exact noise predictor for ``x_star`` plus a prescribed prediction error.

    ``law`` is ``"gaussian"`` (centred, std ``scale``), ``"uniform"``
    (centred on ``[-scale, scale]``) or ``"bias"`` (the constant vector
    ``bias`` alone).  A ``bias`` given with a random law is added to it.
    The random error is keyed on a hash of ``(x_t, t)``, so
    ``predict`` stays a pure function while fresh noise draws see fresh
    errors.
    """

    parameter_count = 0

    def __init__(self, x_star, sched: NoiseSchedule, law: str = "gaussian",
                 scale: float = 0.1, bias=None):
        if law not in ("gaussian", "uniform", "bias"):
            raise ValueError(f"unknown error law {law!r}")
        self.x_star = np.asarray(x_star, dtype=np.float64)
        self.sched = sched
        self.law = law
        self.scale = float(scale)
        self.bias = None if bias is None else np.broadcast_to(
            np.asarray(bias, np.float64), self.x_star.shape)
        if law == "bias" and self.bias is None:
            raise ValueError("bias law needs a bias vector")

    def _error(self, x_t: np.ndarray, t: int) -> np.ndarray:
        if self.law == "bias":
            return self.bias
        h = hashlib.blake2b(np.ascontiguousarray(x_t).tobytes()
                            + int(t).to_bytes(4, "little"), digest_size=8)
        rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
        if self.law == "gaussian":
            err = self.scale * rng.standard_normal(x_t.shape)
        else:
            err = rng.uniform(-self.scale, self.scale, x_t.shape)
        return err if self.bias is None else err + self.bias

    def predict(self, x_t, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        ab = self.sched.abar(t)
        exact = (x_t - np.sqrt(ab) * self.x_star) / np.sqrt(1.0 - ab)
        return exact + self._error(x_t, t)


class SingleJumpEndpoint(LocalEndpoint):
    """Local variation that always denoises in one jump (k = t)."""

    def vary(self, x, t: int, seed: int) -> np.ndarray:
        return variation_local(self.model, self.sched, x, t, t, seed)


def error_law_endpoint(x_star, sched: NoiseSchedule, law: str = "gaussian",
                       scale: float = 0.1, bias=None, k: int | None = None):
    """Variation endpoint whose model errs according to ``law``.

    ``k=None`` gives a single jump (k = t), the setting the identity covers.
    """
    model = ErrorLawDenoiser(x_star, sched, law, scale, bias)
    if k is None:
        return SingleJumpEndpoint(model, sched)
    return LocalEndpoint(model, sched, k)


@dataclass
class ConcentrationReport:
    n_values: list
    beta: float
    p_hat: list
    mean_err: list
    trials: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,p_hat\n")
        for n, p in zip(self.n_values, self.p_hat):
            buf.write(f"{n},{p!r}\n")
        return buf.getvalue()

    def loglog_slope(self) -> float:
        """Least-squares slope of log mean error against log n."""
        return float(np.polyfit(np.log(self.n_values), np.log(self.mean_err), 1)[0])


def concentration_curve(endpoint, x, t: int, n_values=(1, 4, 16, 64),
                        beta: float | None = None, trials: int = 500,
                        seed: int = 0) -> ConcentrationReport:
    """Monte-Carlo estimate of ``P(||x_hat_n - x|| >= beta)`` and the mean error.

    Each trial draws ``max(n_values)`` variations and the estimate for every
    n uses the first n of them.  ``beta`` defaults to the median error at the
    smallest n.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials per n")
    n_values = sorted(int(n) for n in n_values)
    if n_values[0] < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    n_max = n_values[-1]
    errs = np.empty((len(n_values), trials))
    for trial in range(trials):
        acc = np.zeros_like(x)
        j = 0
        for r in range(n_max):
            acc += endpoint.vary(x, t, derive_seed(seed, trial, r))
            if r + 1 == n_values[j]:
                errs[j, trial] = np.linalg.norm(acc / (r + 1) - x)
                j += 1
    if beta is None:
        beta = float(np.median(errs[0]))
    p_hat = [float(np.mean(e >= beta)) for e in errs]
    mean_err = [float(e.mean()) for e in errs]
    return ConcentrationReport(n_values, float(beta), p_hat, mean_err, trials)
