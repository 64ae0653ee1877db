"""Sweep one attack parameter at a time against a single trained model.

Run: python demos/07_ablations.py [out_dir]   (several minutes)
"""

import sys
from pathlib import Path

from varmia.config import ExperimentConfig
from varmia.harness import prepare, run_ablation

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo_ablation")
cfg = ExperimentConfig.from_dict({"output_dir": str(out)})
lab = prepare(cfg, out / "model")

for axis, values in (("n", [1, 2, 5, 10, 20]), ("t", [50, 200, 500, 800]),
                     ("p", [1, 2, 3, 4]), ("k", [20, 100, 200])):
    sub = ExperimentConfig.from_dict({"output_dir": str(out / axis)})
    ms = run_ablation(sub, axis, values, lab)
    print(axis, " ".join(f"{v}:{m.metrics['auc']:.3f}" for v, m in zip(values, ms)))
