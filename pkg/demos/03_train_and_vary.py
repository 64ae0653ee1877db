"""Train a small denoiser on member images and call it as a variation API.

Run: python demos/03_train_and_vary.py   (about half a minute)
"""

import numpy as np

from varmia.attack import dist_lp
from varmia.data import Dataset, MembershipSplit, gen_shape_dataset, split_members
from varmia.denoiser import TrainConfig, train_denoiser
from varmia.diffusion import build_schedule
from varmia.seeding import derive_seed
from varmia.variation import LatentEndpoint, LinearCodec, LocalEndpoint

sched = build_schedule()
ds = gen_shape_dataset(200, 16, seed=0)
split = split_members(ds, seed=0)
cfg = TrainConfig(hidden=(256, 256), lr=2e-3, epochs=10_000, max_steps=3000,
                  cosine_decay=True)
model = train_denoiser(ds, split, sched, cfg)
h = model.loss_history
print(f"{model.parameter_count} parameters, loss {np.mean(h[:100]):.4f} -> "
      f"{np.mean(h[-100:]):.4f}")

# The endpoint only exposes vary(x, t, seed); the attack never sees the model.
api = LocalEndpoint(model, sched, k=100)
for label, ids in (("member", split.members[:25]), ("nonmember", split.nonmembers[:25])):
    errs = [dist_lp(ds.samples[i], api.vary(ds.samples[i], 200, derive_seed(0, int(i), r)), 1)
            for i in ids for r in range(4)]
    print(f"{label:9s} mean L1 to a variation over 25 images: {np.mean(errs):.4f}")

# Latent variation: encode with a linear codec, vary in latent space, decode.
members = ds.samples[split.members]
codec = LinearCodec.fit(members, latent_dim=32)
latents = np.stack([codec.encode(m) for m in members])
zmodel = train_denoiser(Dataset(latents), MembershipSplit(np.arange(len(latents)), []),
                        sched, cfg)
lat_api = LatentEndpoint(zmodel, sched, codec, k=5)
x = ds.samples[split.members[0]]
print(f"codec round-trip error {codec.roundtrip_error:.3f}; latent variation L1 "
      f"{dist_lp(x, lat_api.vary(x, 10, 1), 1):.4f}")
