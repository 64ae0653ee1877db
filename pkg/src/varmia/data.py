"""Desk-scale datasets: Gaussian-mixture point clouds and procedural shapes.

Shapes images are single-channel ``(1, side, side)`` float32 arrays with a
black background and one filled rectangle, disc or cross.  Every image is a
pure function of its descriptor, so a style-shifted twin can re-render the
same geometry with a different fill.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import derive_seed, rng_for
from .tensor_io import load_tensor, save_tensor

SHAPE_KINDS = ("rect", "disc", "cross")
TEXTURES = ("stripes", "checker")


class Dataset:
    """Samples plus optional content descriptors.

    ``take`` is the access path used by training code; it counts reads per
    index so tests can prove which samples a model ever saw.
    """

    def __init__(self, samples, labels=None, seed: int = 0, kind: str = "custom",
                 meta: dict | None = None):
        arr = np.asarray(samples, dtype=np.float32)
        if arr.ndim < 2 or len(arr) == 0:
            raise ValueError("dataset needs a nonempty leading sample axis")
        arr.setflags(write=False)
        self.samples = arr
        self.labels = labels
        self.seed = int(seed)
        self.kind = kind
        self.meta = dict(meta or {})
        self.access_counts = np.zeros(len(arr), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.samples.shape[1:]

    def take(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        np.add.at(self.access_counts, idx, 1)
        return self.samples[idx]


@dataclass(frozen=True)
class MembershipSplit:
    members: np.ndarray
    nonmembers: np.ndarray
    seed: int = 0

    def __post_init__(self):
        m = np.sort(np.asarray(self.members, dtype=np.int64))
        nm = np.sort(np.asarray(self.nonmembers, dtype=np.int64))
        if np.intersect1d(m, nm).size:
            raise ValueError("members and nonmembers overlap")
        object.__setattr__(self, "members", m)
        object.__setattr__(self, "nonmembers", nm)

    def is_member(self, n: int) -> np.ndarray:
        flags = np.zeros(n, dtype=bool)
        flags[self.members] = True
        return flags


# --------------------------------------------------------------------------
# point clouds
# --------------------------------------------------------------------------

def gen_gmm_dataset(n: int, d: int, K: int, seed: int, sigma: float = 0.04) -> Dataset:
    """``n`` points from a K-component mixture with means on a lattice in [0,1]^d."""
    if min(n, d, K) < 1:
        raise ValueError("n, d and K must all be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    g = max(2, math.ceil(K ** (1.0 / d)))
    rng = rng_for(seed, 0, 0)
    if g ** d <= 1_000_000:
        cells = rng.choice(g ** d, size=K, replace=False)
    else:
        cells = rng.integers(0, g ** d, size=K)
    lattice = np.stack(np.unravel_index(cells, (g,) * d), axis=1)
    means = (lattice + 0.5) / g
    comp = rng.integers(0, K, size=n)
    noise = rng.standard_normal((n, d))
    pts = np.clip(means[comp] + sigma * noise, 0.0, 1.0)
    return Dataset(pts, labels=[{"component": int(c)} for c in comp], seed=seed,
                   kind="gmm", meta={"d": d, "K": K, "sigma": sigma,
                                     "means": means.tolist()})


# --------------------------------------------------------------------------
# procedural shapes
# --------------------------------------------------------------------------

def _shape_mask(desc: dict, side: int) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side]
    dy, dx = yy - desc["cy"], xx - desc["cx"]
    a, b = desc["a"], desc["b"]
    kind = desc["kind"]
    if kind == "rect":
        return (np.abs(dx) <= a) & (np.abs(dy) <= b)
    if kind == "disc":
        return dx * dx + dy * dy <= a * a
    if kind == "cross":
        return (((np.abs(dx) <= a) & (np.abs(dy) <= b))
                | ((np.abs(dy) <= a) & (np.abs(dx) <= b)))
    raise ValueError(f"unknown shape kind {kind!r}")


def make_texture(kind: str, side: int, width: int, lo: float, hi: float,
                 axis: int = 1) -> np.ndarray:
    """Two-level stripes (along ``axis``) or checkerboard with cell ``width``."""
    if width < 1:
        raise ValueError("texture width must be >= 1")
    yy, xx = np.mgrid[0:side, 0:side]
    if kind == "stripes":
        coord = xx if axis == 1 else yy
        on = (coord // width) % 2 == 0
    elif kind == "checker":
        on = ((xx // width) + (yy // width)) % 2 == 0
    else:
        raise ValueError(f"unknown texture {kind!r}")
    return np.where(on, hi, lo)


def render_shape(desc: dict, side: int) -> np.ndarray:
    """Render one descriptor to a ``(1, side, side)`` float32 image."""
    mask = _shape_mask(desc, side)
    style = desc.get("style")
    if style is None:
        fill = np.full((side, side), desc["intensity"])
    else:
        fill = make_texture(style["texture"], side, style["width"],
                            style["lo"], style["hi"], style.get("axis", 1))
    img = np.where(mask, fill, 0.0)
    return img.astype(np.float32)[None]


def random_shape_descriptor(rng: np.random.Generator, side: int) -> dict:
    kind = SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))]
    lo, hi = max(2, side // 8), max(2, side // 4)
    if kind == "rect":
        a, b = int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))
    elif kind == "disc":
        a = int(rng.integers(lo, hi + 1))
        b = a
    else:
        a = int(rng.integers(lo, hi + 1))
        b = int(rng.integers(0, max(1, a // 2)))
    margin = a if kind != "rect" else max(a, b)
    cy = int(rng.integers(margin, side - margin))
    cx = int(rng.integers(margin, side - margin))
    intensity = round(float(rng.uniform(0.4, 1.0)), 6)
    return {"kind": kind, "cy": cy, "cx": cx, "a": a, "b": b,
            "intensity": intensity}


def gen_shape_dataset(n: int, side: int, seed: int) -> Dataset:
    """``n`` single-shape grayscale images of size ``side``x``side``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if side < 8:
        raise ValueError(f"side must be >= 8, got {side}")
    descs = [random_shape_descriptor(rng_for(seed, i, 0), side) for i in range(n)]
    imgs = np.stack([render_shape(d, side) for d in descs])
    return Dataset(imgs, labels=descs, seed=seed, kind="shapes", meta={"side": side})


def style_shift(ds: Dataset, seed: int, stripe_width: int = 2) -> Dataset:
    """Re-render every shape with the same geometry but a textured fill."""
    if ds.labels is None or ds.kind not in ("shapes", "shapes_shifted"):
        raise ValueError("style_shift needs a shapes dataset with descriptors")
    side = ds.sample_shape[-1]
    out_descs = []
    for i, desc in enumerate(ds.labels):
        rng = rng_for(seed, i, 1)
        lo = round(float(rng.uniform(0.15, 0.3)), 6)
        hi = round(float(rng.uniform(0.75, 0.95)), 6)
        style = {"texture": TEXTURES[int(rng.integers(0, 2))],
                 "width": int(stripe_width), "lo": lo, "hi": hi,
                 "axis": int(rng.integers(0, 2))}
        out_descs.append({**{k: v for k, v in desc.items() if k != "style"},
                          "style": style})
    imgs = np.stack([render_shape(d, side) for d in out_descs])
    return Dataset(imgs, labels=out_descs, seed=seed, kind="shapes_shifted",
                   meta={"side": side, "source_seed": ds.seed})


def split_members(ds_or_n, seed: int) -> MembershipSplit:
    """Seeded uniform 50/50 member/nonmember partition."""
    n = ds_or_n if isinstance(ds_or_n, (int, np.integer)) else len(ds_or_n)
    if n < 1:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(derive_seed(seed, 0, 7)).permutation(n)
    half = n // 2
    return MembershipSplit(perm[:half], perm[half:], seed=seed)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def save_dataset(ds: Dataset, directory, split: MembershipSplit | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, s in enumerate(ds.samples):
        name = f"sample_{i:06d}.tnsr"
        save_tensor(out / name, s)
        files.append(name)
    manifest = {"kind": ds.kind, "seed": ds.seed, "shape": list(ds.sample_shape),
                "files": files, "labels": ds.labels, "meta": ds.meta}
    if split is not None:
        manifest["split"] = {"seed": split.seed,
                             "members": split.members.tolist(),
                             "nonmembers": split.nonmembers.tolist()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out


def load_dataset(directory) -> tuple[Dataset, MembershipSplit | None]:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    samples = np.stack([load_tensor(src / f) for f in manifest["files"]])
    ds = Dataset(samples, labels=manifest.get("labels"), seed=manifest["seed"],
                 kind=manifest["kind"], meta=manifest.get("meta"))
    split = None
    if "split" in manifest:
        sp = manifest["split"]
        split = MembershipSplit(sp["members"], sp["nonmembers"], seed=sp["seed"])
    return ds, split
