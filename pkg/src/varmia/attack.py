"""Membership scores from a variation endpoint, plus the white-box loss baseline.

Every score is a negated distance, so larger always means "more member-like"
and the threshold rule ``D(x, x_hat) < tau`` becomes ``score > -tau``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .nn import Adam, DenseNet
from .seeding import derive_seed

METHODS = ("rediffuse", "rediffuse_plus", "loss_baseline")


@dataclass(frozen=True)
class AttackRecord:
    sample_id: int
    is_member: bool
    method: str
    score: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score for sample {self.sample_id}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        missing = {"n", "t", "k", "distance"} - set(self.params)
        if missing:
            raise ValueError(f"record params missing {sorted(missing)}")


# --------------------------------------------------------------------------
# distances
# --------------------------------------------------------------------------

def dist_lp(a, b, p: int = 1) -> float:
    """Mean over elements of ``|a - b| ** p``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= 8):
        raise ValueError(f"p must be an integer in [1, 8], got {p!r}")
    return float(np.mean(np.abs(a - b) ** p))


SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _gaussian_taps(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    w = len(taps)
    rows = np.lib.stride_tricks.sliding_window_view(img, w, axis=0) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, w, axis=1) @ taps


def _as_gray(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a single-channel 2-D image, got shape {a.shape}")
    if a.size and (a.min() < -1e-6 or a.max() > 1.0 + 1e-6):
        raise ValueError(f"{name} has values outside [0, 1]")
    return a


def ssim(a, b, window: int = 11, sigma: float = 1.5) -> float:
    """Mean local SSIM with a Gaussian window (one global window for tiny images)."""
    a, b = _as_gray(a, "a"), _as_gray(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        mu_a, mu_b = a.mean(), b.mean()
        var_a, var_b = a.var(), b.var()
        cov = ((a - mu_a) * (b - mu_b)).mean()
    else:
        taps = _gaussian_taps(window, sigma)
        mu_a, mu_b = _filter_valid(a, taps), _filter_valid(b, taps)
        var_a = _filter_valid(a * a, taps) - mu_a ** 2
        var_b = _filter_valid(b * b, taps) - mu_b ** 2
        cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def dist_ssim(a, b) -> float:
    return 1.0 - ssim(a, b)


class LpDistance:
    def __init__(self, p: int = 1):
        self.p = int(p)
        self.name = f"l{self.p}"

    def __call__(self, a, b) -> float:
        return dist_lp(a, b, self.p)


class SsimDistance:
    """``1 - SSIM`` after clipping both images to the valid range.

    Reconstructions can overshoot [0, 1] slightly; an image API would clip
    before returning them, so the clip happens here rather than in SSIM.
    """

    name = "ssim"

    def __call__(self, a, b) -> float:
        return dist_ssim(np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0))


def make_distance(name: str, p: int = 1, classifier=None) -> Callable:
    if name == "ssim":
        return SsimDistance()
    if name in ("lp", "l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8"):
        return LpDistance(p if name == "lp" else int(name[1:]))
    if name == "learned":
        if classifier is None:
            raise ValueError("learned distance needs a trained classifier")
        return LearnedDistance(classifier)
    raise ValueError(f"unknown distance {name!r}")


# --------------------------------------------------------------------------
# learned distance
# --------------------------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class DiffClassifier:
    """Member probability from the absolute difference ``|x - x_hat|``."""

    def __init__(self, net: DenseNet, train_index=None):
        self.net = net
        self.train_index = np.asarray([] if train_index is None else train_index, dtype=np.int64)

    def prob(self, diff) -> np.ndarray:
        d = np.asarray(diff, dtype=np.float64)
        flat = d.reshape(-1, self.net.widths[0])
        return _sigmoid(self.net.forward(flat)[:, 0].astype(np.float64))

    def __call__(self, x, x_hat) -> float:
        diff = np.abs(np.asarray(x, np.float64) - np.asarray(x_hat, np.float64))
        return float(self.prob(diff.reshape(1, -1))[0])


class LearnedDistance:
    """``D(x, x_hat) = -f(|x - x_hat|)``; negative member probability, not a metric."""

    name = "learned"

    def __init__(self, classifier: DiffClassifier):
        self.classifier = classifier

    def __call__(self, a, b) -> float:
        return -self.classifier(a, b)


def train_distance_classifier(pairs, fraction: float = 0.2, seed: int = 0,
                              hidden: int = 64, steps: int = 2000,
                              lr: float = 1e-3, batch_size: int = 32) -> DiffClassifier:
    """Fit the classifier on a seeded ``fraction`` of ``(x, x_hat, is_member)`` pairs.

    The indices used for training are kept on ``classifier.train_index`` so
    that callers evaluate on the remainder only.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    pairs = list(pairs)
    order = np.random.default_rng(derive_seed(seed, 0, 3)).permutation(len(pairs))
    n_train = max(1, int(round(fraction * len(pairs))))
    train_idx = np.sort(order[:n_train])
    X = np.stack([np.abs(np.asarray(pairs[i][0], np.float64)
                         - np.asarray(pairs[i][1], np.float64)).reshape(-1)
                  for i in train_idx])
    y = np.array([float(bool(pairs[i][2])) for i in train_idx])
    if y.min() == y.max():
        raise ValueError("training slice holds a single class")
    rng = np.random.default_rng(derive_seed(seed, 1, 3))
    net = DenseNet([X.shape[1], hidden, 1], rng, np.float64)
    opt = Adam(net.params, lr=lr)
    for _ in range(steps):
        idx = rng.integers(0, len(X), size=min(batch_size, len(X)))
        logits, cache = net.forward(X[idx], cache=True)
        p = _sigmoid(logits[:, 0])
        # d(mean BCE)/d(logit)
        g = ((p - y[idx]) / len(idx))[:, None]
        grads, _ = net.backward(g, cache)
        opt.step(net.params, grads)
    net.freeze()
    return DiffClassifier(net, train_idx)


# --------------------------------------------------------------------------
# scores
# --------------------------------------------------------------------------

def reconstruct(endpoint, x, t: int, seeds: Sequence[int]) -> np.ndarray:
    """Pixel-space mean of ``len(seeds)`` independent variations, in seed order."""
    if len(seeds) == 0:
        raise ValueError("need at least one variation")
    acc = np.zeros(np.shape(x), dtype=np.float64)
    for s in seeds:
        acc += np.asarray(endpoint.vary(x, t, s), dtype=np.float64)
    return acc / len(seeds)


def rediffuse_score(endpoint, x, t: int, n: int, dist, seeds: Sequence[int]) -> float:
    """Negated distance between ``x`` and the average of ``n`` variations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(seeds) != n:
        raise ValueError(f"expected {n} seeds, got {len(seeds)}")
    return -dist(x, reconstruct(endpoint, x, t, seeds))


def rediffuse_plus_score(endpoint, x, t: int, dist, seed_pair) -> float:
    """Negated distance between two independent variations of ``x``."""
    s1, s2 = seed_pair
    if s1 == s2:
        raise ValueError("the two seeds must differ")
    return -dist(endpoint.vary(x, t, s1), endpoint.vary(x, t, s2))


def loss_baseline_score(model, sched, x, t: int, seed: int) -> float:
    """White-box: negated squared noise-prediction error at step ``t``."""
    from .diffusion import forward_noise

    x = np.asarray(x, dtype=np.float64)
    eps = np.random.default_rng(int(seed)).standard_normal(x.shape)
    pred = np.asarray(model.predict(forward_noise(x, t, eps, sched), t), np.float64)
    return -float(np.sum((eps - pred) ** 2))


def classify_membership(score: float, tau: float) -> bool:
    """Member iff ``score > -tau``; a tie is a nonmember."""
    return score > -tau


def repeat_seeds(experiment_seed: int, sample_id: int, n: int) -> list[int]:
    return [derive_seed(experiment_seed, sample_id, r) for r in range(n)]


def score_samples(samples, sample_ids, is_member, *, method: str, t: int,
                  n: int = 10, k: int | None = None, distance=None,
                  endpoint=None, model=None, sched=None,
                  experiment_seed: int = 0, workers: int = 1) -> list[AttackRecord]:
    """Score every sample with one method; output order follows the input.

    Per-sample seeds come from ``derive_seed`` so ``workers`` never changes
    the result.
    """
    dist = distance if distance is not None else LpDistance(1)
    params = {"n": int(n) if method == "rediffuse" else (2 if method == "rediffuse_plus" else 1),
              "t": int(t), "k": None if k is None else int(k),
              "distance": getattr(dist, "name", "custom") if method != "loss_baseline" else "mse"}

    def one(i: int) -> AttackRecord:
        x, sid = samples[i], int(sample_ids[i])
        if method == "rediffuse":
            s = rediffuse_score(endpoint, x, t, n, dist, repeat_seeds(experiment_seed, sid, n))
        elif method == "rediffuse_plus":
            s = rediffuse_plus_score(endpoint, x, t, dist,
                                     tuple(repeat_seeds(experiment_seed, sid, 2)))
        elif method == "loss_baseline":
            s = loss_baseline_score(model, sched, x, t, derive_seed(experiment_seed, sid, 0))
        else:
            raise ValueError(f"unknown method {method!r}")
        return AttackRecord(sid, bool(is_member[i]), method, float(s), dict(params))

    if workers <= 1:
        return [one(i) for i in range(len(samples))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(samples))))
