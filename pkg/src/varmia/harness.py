"""Config-driven pipeline: generate -> split -> train -> score -> evaluate."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (AttackRecord, LearnedDistance, make_distance, reconstruct,
                     repeat_seeds, score_samples, train_distance_classifier)
from .config import ConfigError, ExperimentConfig
from .data import (Dataset, MembershipSplit, gen_gmm_dataset, gen_shape_dataset,
                   split_members, style_shift)
from .denoiser import MlpDenoiser, TrainingDivergedError, train_denoiser
from .diffusion import NoiseSchedule, build_schedule
from .metrics import summarize
from .plotting import plot_roc_svg
from .variation import LatentEndpoint, LinearCodec, LocalEndpoint

log = logging.getLogger(__name__)

SCORE_COLUMNS = ("sample_id", "is_member", "method", "score", "n", "t", "k")
SCORE_HEADER = "# score is a negated distance: higher means more member-like"


class PhaseError(RuntimeError):
    def __init__(self, phase: str, message: str):
        super().__init__(f"{phase} phase failed: {message}")
        self.phase = phase


@dataclass
class Lab:
    """Everything produced before the attack phase; shared across ablations."""

    dataset: Dataset
    split: MembershipSplit
    sched: NoiseSchedule
    model: MlpDenoiser
    codec: LinearCodec | None = None
    model_dir: Path | None = None

    def endpoint(self, k: int):
        if self.codec is not None:
            return LatentEndpoint(self.model, self.sched, self.codec, k)
        return LocalEndpoint(self.model, self.sched, k)


@dataclass
class RunManifest:
    config_hash: str
    paths: dict
    wall_clock_s: float
    version: str = __version__
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


@contextmanager
def _phase(name: str):
    """Re-raise anything escaping the block as a PhaseError naming the phase."""
    try:
        yield
    except (PhaseError, ConfigError):
        raise
    except Exception as exc:
        raise PhaseError(name, f"{type(exc).__name__}: {exc}") from exc


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    dc = cfg.dataset
    if dc.kind == "shapes":
        return gen_shape_dataset(dc.n, dc.side, cfg.seed)
    return gen_gmm_dataset(dc.n, dc.d, dc.K, cfg.seed, dc.sigma)


def prepare(cfg: ExperimentConfig, model_dir=None) -> Lab:
    """Generate data, split it and train the target model."""
    cfg.validate()
    with _phase("generate"):
        ds = build_dataset(cfg)
        sched = build_schedule(cfg.schedule.T, cfg.schedule.beta_start,
                               cfg.schedule.beta_end)
    with _phase("split"):
        split = split_members(ds, cfg.seed)
    with _phase("train"):
        codec = None
        train_ds, train_split = ds, split
        if cfg.attack.latent:
            members = ds.take(split.members)
            codec = LinearCodec.fit(members, cfg.attack.latent_dim)
            z = np.stack([codec.encode(x) for x in members])
            train_ds = Dataset(z, seed=ds.seed, kind="latent")
            train_split = MembershipSplit(np.arange(len(z)), np.array([], dtype=np.int64))
        t0 = time.perf_counter()
        try:
            model = train_denoiser(train_ds, train_split, sched, cfg.training)
        except TrainingDivergedError as err:
            raise PhaseError("train", str(err)) from err
        log.info("trained %d-parameter denoiser in %.1fs", model.parameter_count,
                 time.perf_counter() - t0)
        if model_dir is not None:
            model_dir = Path(model_dir)
            model.save(model_dir)
            if codec is not None:
                codec.save(model_dir / "codec")
    return Lab(ds, split, sched, model, codec, model_dir)


def evaluation_set(cfg: ExperimentConfig, ds: Dataset, split: MembershipSplit):
    """``(samples, sample_ids, is_member)`` to be scored."""
    if cfg.dataset.nonmembers == "style_shift":
        shifted = style_shift(ds, cfg.seed + 1, cfg.dataset.stripe_width)
        m = split.members
        samples = np.concatenate([ds.samples[m], shifted.samples[m]])
        ids = np.concatenate([m, len(ds) + m])
        flags = np.concatenate([np.ones(len(m), bool), np.zeros(len(m), bool)])
        return samples, ids, flags
    return ds.samples, np.arange(len(ds)), split.is_member(len(ds))


def attack_records(cfg: ExperimentConfig, lab: Lab) -> list[AttackRecord]:
    at = cfg.attack
    t, k = cfg.attack_t(), cfg.attack_k()
    samples, ids, flags = evaluation_set(cfg, lab.dataset, lab.split)
    if at.method == "loss_baseline":
        # white-box: the only path allowed to touch the model directly
        xs = samples if lab.codec is None else np.stack([lab.codec.encode(x) for x in samples])
        return score_samples(xs, ids, flags, method="loss_baseline", t=t, n=1, k=0,
                             model=lab.model, sched=lab.sched,
                             experiment_seed=cfg.seed, workers=cfg.workers)
    endpoint = lab.endpoint(k)
    if at.distance == "learned":
        return _learned_records(cfg, endpoint, samples, ids, flags, t, k)
    dist = make_distance(at.distance, at.p)
    return score_samples(samples, ids, flags, method=at.method, t=t, n=at.n, k=k,
                         distance=dist, endpoint=endpoint, experiment_seed=cfg.seed,
                         workers=cfg.workers)


def _learned_records(cfg, endpoint, samples, ids, flags, t, k):
    n = cfg.attack.n
    recon = [reconstruct(endpoint, x, t, repeat_seeds(cfg.seed, int(sid), n))
             for x, sid in zip(samples, ids)]
    pairs = [(x, xh, m) for x, xh, m in zip(samples, recon, flags)]
    clf = train_distance_classifier(pairs, cfg.attack.classifier_fraction, seed=cfg.seed)
    dist = LearnedDistance(clf)
    held = np.setdiff1d(np.arange(len(pairs)), clf.train_index)
    params = {"n": n, "t": t, "k": k, "distance": "learned"}
    return [AttackRecord(int(ids[i]), bool(flags[i]), "rediffuse",
                         -dist(samples[i], recon[i]), dict(params)) for i in held]


# --------------------------------------------------------------------------
# score files
# --------------------------------------------------------------------------

def scores_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(SCORE_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for r in records:
        w.writerow([r.sample_id, int(r.is_member), r.method, repr(float(r.score)),
                    r.params["n"], r.params["t"], r.params["k"]])
    return buf.getvalue()


def read_scores_csv(path_or_text) -> list[AttackRecord]:
    text = path_or_text
    if not (isinstance(text, str) and "\n" in text):
        text = Path(path_or_text).read_text()
    rows = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    out = []
    for row in rows:
        out.append(AttackRecord(int(row["sample_id"]), row["is_member"] == "1",
                                row["method"], float(row["score"]),
                                {"n": int(row["n"]), "t": int(row["t"]),
                                 "k": int(row["k"]), "distance": "?"}))
    return out


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, lab: Lab | None = None) -> RunManifest:
    """Run the full pipeline and write scores, metrics, ROC plot and manifest."""
    start = time.perf_counter()
    cfg.validate()
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise PhaseError("setup", f"cannot create {out}: {err}") from err
    if lab is None:
        lab = prepare(cfg, out / "model")
    with _phase("score"):
        records = attack_records(cfg, lab)
    with _phase("evaluate"):
        summary = summarize(records, cfg.eval.target_fpr, cfg.eval.tau)
    with _phase("write"):
        paths = {"config": out / "config.json", "scores": out / "scores.csv",
                 "metrics": out / "metrics.json", "roc_csv": out / "roc.csv",
                 "roc_svg": out / "roc.svg"}
        paths["config"].write_text(cfg.to_json())
        paths["scores"].write_text(scores_to_csv(records))
        paths["metrics"].write_text(summary.to_json())
        paths["roc_csv"].write_text(summary.points_csv())
        plot_roc_svg({cfg.attack.method: summary}, paths["roc_svg"])
        if lab.model_dir is not None:
            paths["model"] = Path(lab.model_dir)
        manifest = RunManifest(
            config_hash=cfg.config_hash(),
            paths={k: str(v) for k, v in paths.items()},
            wall_clock_s=round(time.perf_counter() - start, 3),
            metrics={"auc": summary.auc, "asr": summary.asr,
                     "tpr_at_fpr": summary.tpr_at_1pct_fpr},
        )
        (out / "manifest.json").write_text(manifest.to_json())
        manifest.paths["manifest"] = str(out / "manifest.json")
    return manifest


ABLATION_AXES = ("n", "t", "k", "p")


def _ablated(cfg: ExperimentConfig, axis: str, value, out: Path) -> ExperimentConfig:
    sub = copy.deepcopy(cfg)
    sub.output_dir = str(out / f"{axis}_{value}")
    if axis == "p":
        sub.attack.distance = "lp"
    if axis == "t" and cfg.attack.k is not None:
        sub.attack.k = min(cfg.attack.k, int(value))
    setattr(sub.attack, axis, int(value))
    try:
        sub.validate()
    except ConfigError as err:
        raise ConfigError(f"invalid {axis} value {value!r}: {err}") from None
    return sub


def run_ablation(cfg: ExperimentConfig, axis: str, values,
                 lab: Lab | None = None) -> list[RunManifest]:
    """One run per value of ``axis``, all against the same trained model."""
    if axis not in ABLATION_AXES:
        raise ConfigError(f"axis must be one of {ABLATION_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("no ablation values given")
    out = Path(cfg.output_dir)
    subs = [_ablated(cfg, axis, v, out) for v in values]
    out.mkdir(parents=True, exist_ok=True)
    if lab is None:
        lab = prepare(cfg, out / "model")
    manifests = [run_experiment(sub, lab) for sub in subs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value", "auc", "asr", "tpr_at_fpr"])
    for v, m in zip(values, manifests):
        w.writerow([axis, v, repr(m.metrics["auc"]), repr(m.metrics["asr"]),
                    repr(m.metrics["tpr_at_fpr"])])
    (out / "ablation.csv").write_text(buf.getvalue())
    return manifests


def load_lab(cfg: ExperimentConfig, model_dir) -> Lab:
    """Rebuild the data side deterministically and load a saved model."""
    ds = build_dataset(cfg)
    split = split_members(ds, cfg.seed)
    model = MlpDenoiser.load(model_dir)
    codec_dir = Path(model_dir) / "codec"
    codec = LinearCodec.load(codec_dir) if codec_dir.exists() else None
    return Lab(ds, split, model.sched, model, codec, Path(model_dir))
