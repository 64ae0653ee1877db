"""MLP noise predictor and its training loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, MembershipSplit
from .diffusion import NoiseSchedule
from .nn import Adam, DenseNet
from .seeding import derive_seed
from .tensor_io import load_tensor, save_tensor

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal features of the step index, shape ``(len(t), dim)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    args = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((len(t), 1))], axis=1)
    return emb


class MlpDenoiser:
    """Flattened-input MLP ``eps_theta(x_t, t)`` with a sinusoidal time code.

    The prediction is the closed-form optimum for a Gaussian fit of the
    training data (``prior_mean``, ``prior_var``) plus a learned MLP
    residual.  The network sees the centred input rescaled to unit variance.
    With ``prior_var = 1`` and a zero mean this is a plain MLP plus the skip
    ``sqrt(1 - abar_t) * x_t``.
    """

    def __init__(self, sample_shape, net: DenseNet, emb_dim: int, sched: NoiseSchedule,
                 prior_mean=None, prior_var: float = 1.0):
        self.sample_shape = tuple(int(s) for s in sample_shape)
        self.net = net
        self.emb_dim = int(emb_dim)
        self.sched = sched
        d = int(np.prod(self.sample_shape))
        # f32 precision so checkpoints (f32 tensors) reload bit-identically
        pm = np.zeros(d) if prior_mean is None else (
            np.asarray(prior_mean, np.float32).astype(np.float64).reshape(d))
        pm.setflags(write=False)
        self.prior_mean = pm
        self.prior_var = float(prior_var)
        self.loss_history: list[float] = []

    @classmethod
    def init(cls, sample_shape, sched: NoiseSchedule, hidden=(128, 128, 128),
             emb_dim: int = 16, seed: int = 0, prior_mean=None,
             prior_var: float = 1.0, dtype=np.float32) -> "MlpDenoiser":
        d = int(np.prod(sample_shape))
        rng = np.random.default_rng(derive_seed(seed, 0, 11))
        net = DenseNet([d + emb_dim, *hidden, d], rng, dtype)
        return cls(sample_shape, net, emb_dim, sched, prior_mean, prior_var)

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.sample_shape))

    @property
    def parameter_count(self) -> int:
        return self.net.parameter_count

    def _prepare(self, x_flat, t):
        """Network features and the Gaussian skip term for a batch."""
        t_arr = np.broadcast_to(np.asarray(t), (len(x_flat),))
        ab = np.concatenate([[1.0], self.sched.alpha_bar])[t_arr][:, None]
        u = x_flat - np.sqrt(ab) * self.prior_mean
        v = ab * self.prior_var + 1.0 - ab
        skip = np.sqrt(1.0 - ab) * u / v
        emb = time_embedding(t_arr, self.emb_dim)
        feats = np.concatenate([u / np.sqrt(v), emb], axis=1).astype(self.net.dtype)
        return feats, skip

    def predict(self, x_t, t) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        single = x_t.shape == self.sample_shape
        flat = x_t.reshape(-1, self.input_dim)
        feats, skip = self._prepare(flat, t)
        out = skip + self.net.forward(feats)
        return out.reshape(self.sample_shape if single else x_t.shape)

    def loss_and_grads(self, x0, t, eps):
        """Mean squared noise-prediction error and its parameter gradients."""
        x0 = x0.reshape(len(x0), -1).astype(np.float64)
        eps = eps.reshape(len(eps), -1).astype(np.float64)
        ab = self.sched.alpha_bar[np.asarray(t) - 1][:, None]
        x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
        feats, skip = self._prepare(x_t, t)
        out, cache = self.net.forward(feats, cache=True)
        diff = skip + out - eps
        loss = float(np.mean(np.square(diff)))
        grads, _ = self.net.backward(2.0 * diff / diff.size, cache)
        return loss, grads

    def astype(self, dtype) -> "MlpDenoiser":
        return MlpDenoiser(self.sample_shape, self.net.astype(dtype), self.emb_dim,
                           self.sched, self.prior_mean, self.prior_var)

    def architecture(self) -> dict:
        return {"type": "mlp_denoiser", "sample_shape": list(self.sample_shape),
                "widths": self.net.widths, "emb_dim": self.emb_dim,
                "prior_var": self.prior_var, "schedule": self.sched.to_dict()}

    def save(self, directory) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        arch = self.architecture()
        arch["loss_history"] = self.loss_history
        (out / "arch.json").write_text(json.dumps(arch))
        for i, p in enumerate(self.net.params):
            save_tensor(out / f"param_{i:02d}.tnsr", p)
        save_tensor(out / "prior_mean.tnsr", self.prior_mean)
        return out

    @classmethod
    def load(cls, directory) -> "MlpDenoiser":
        """Inverse of ``save``; the schedule is rebuilt from the descriptor."""
        from .diffusion import build_schedule
        src = Path(directory)
        arch = json.loads((src / "arch.json").read_text())
        if arch.get("type") != "mlp_denoiser":
            raise ValueError(f"{src} does not hold an MLP denoiser checkpoint")
        net = DenseNet(arch["widths"], None, np.float32)
        net.params = [load_tensor(src / f"param_{i:02d}.tnsr")
                      for i in range(len(net.params))]
        net.freeze()
        sc = arch["schedule"]
        sched = build_schedule(sc["T"], sc["beta_start"], sc["beta_end"])
        model = cls(arch["sample_shape"], net, arch["emb_dim"], sched,
                    load_tensor(src / "prior_mean.tnsr"), arch["prior_var"])
        model.loss_history = list(arch.get("loss_history", []))
        return model


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    max_steps: int = 20_000
    hidden: tuple = (128, 128, 128)
    emb_dim: int = 16
    seed: int = 0
    gaussian_skip: bool = True
    cosine_decay: bool = False
    log_every: int = 1000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not (self.lr > 0 and self.epochs > 0 and self.batch_size > 0
                and self.max_steps > 0):
            raise ValueError("lr, epochs, batch_size and max_steps must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def train_denoiser(ds: Dataset, split: MembershipSplit, sched: NoiseSchedule,
                   cfg: TrainConfig | None = None) -> MlpDenoiser:
    """Fit an MLP noise predictor on the member samples only."""
    cfg = cfg or TrainConfig()
    members = np.asarray(split.members)
    if members.size == 0:
        raise ValueError("no member samples to train on")
    data = ds.take(members).astype(np.float64)
    flat = data.reshape(len(data), -1)
    prior_mean = flat.mean(axis=0) if cfg.gaussian_skip else None
    prior_var = float(flat.var(axis=0).mean()) if cfg.gaussian_skip else 1.0
    model = MlpDenoiser.init(ds.sample_shape, sched, cfg.hidden, cfg.emb_dim,
                             cfg.seed, prior_mean, max(prior_var, 1e-4))
    opt = Adam(model.net.params, lr=cfg.lr)
    rng = np.random.default_rng(derive_seed(cfg.seed, 1, 0))
    m = len(data)
    step = 0
    running = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            t = rng.integers(1, sched.T + 1, size=len(idx))
            eps = rng.standard_normal((len(idx), model.input_dim))
            loss, grads = model.loss_and_grads(data[idx], t, eps)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at step {step} (epoch {epoch}); "
                    f"try a smaller learning rate than {cfg.lr}")
            if cfg.cosine_decay:
                opt.lr = 0.5 * cfg.lr * (1.0 + math.cos(math.pi * step / cfg.max_steps))
            opt.step(model.net.params, grads)
            running.append(loss)
            step += 1
            if step % cfg.log_every == 0:
                log.info("step %d loss %.5f", step, float(np.mean(running[-cfg.log_every:])))
            if step >= cfg.max_steps:
                break
        if step >= cfg.max_steps:
            break
    model.loss_history = running
    model.net.freeze()
    return model
