"""Serve a checkpoint over HTTP and attack it through the remote client.

Run: python demos/06_remote_api.py
The same service is available from the shell:
    varmia serve --model runs/demo/model --bind 127.0.0.1:8765
"""

import tempfile
from pathlib import Path

import numpy as np

from varmia.attack import LpDistance, rediffuse_score, repeat_seeds
from varmia.data import gen_shape_dataset, split_members
from varmia.denoiser import MlpDenoiser, TrainConfig, train_denoiser
from varmia.diffusion import build_schedule
from varmia.server import VariationService, start_background
from varmia.variation import LocalEndpoint, RemoteEndpoint, RemoteRejectedError

sched = build_schedule()
ds = gen_shape_dataset(100, 16, seed=0)
model = train_denoiser(ds, split_members(ds, 0), sched,
                       TrainConfig(hidden=(128, 128), max_steps=1000, epochs=1000))
ckpt = Path(tempfile.mkdtemp()) / "model"
model.save(ckpt)

server, url = start_background(VariationService(MlpDenoiser.load(ckpt), sched, default_k=100))
remote = RemoteEndpoint(url)
print("health:", remote.health())

x = ds.samples[0]
seeds = repeat_seeds(0, 0, 10)
s_remote = rediffuse_score(remote, x, 200, 10, LpDistance(1), seeds)
s_local = rediffuse_score(LocalEndpoint(model, sched, 100), x, 200, 10, LpDistance(1), seeds)
print(f"remote score {s_remote!r}\nlocal score  {s_local!r}\nidentical: {s_remote == s_local}")

try:
    remote.vary(x, 5000, 1)
except RemoteRejectedError as err:
    print("bad request:", err)
server.shutdown()
