"""Why averaging variations works: the single-jump identity and error concentration.

Run: python demos/05_theory_checks.py
"""

import numpy as np

from varmia.diffusion import build_schedule
from varmia.theory import (ErrorLawDenoiser, concentration_curve, error_gain,
                           error_law_endpoint, identity_check)

sched = build_schedule()
x = np.full(4, 0.5)

# With k = t the reconstruction error is the noise-prediction error, scaled.
b = np.array([0.1, -0.2, 0.05, 0.0])
res = identity_check(ErrorLawDenoiser(x, sched, "bias", bias=b), sched, x, 200)
print(f"identity residual {res:.1e}; gain at t=200 is {error_gain(sched, 200):.3f}")

# Centred errors average out at the usual 1/sqrt(n) rate ...
x1 = np.array([0.5])
rep = concentration_curve(error_law_endpoint(x1, sched, "gaussian", 0.5), x1, 100,
                          trials=500)
print("n      ", rep.n_values)
print("p_hat  ", rep.p_hat, f"(beta={rep.beta:.4f})")
print("mean   ", np.round(rep.mean_err, 5).tolist(), f"slope {rep.loglog_slope():.3f}")

# ... a biased error (how a model treats an unseen sample) does not.
rep = concentration_curve(error_law_endpoint(x, sched, "gaussian", 0.5, bias=b), x, 100,
                          trials=200)
print("biased mean error", np.round(rep.mean_err, 4).tolist(),
      f"-> floor {error_gain(sched, 100) * np.linalg.norm(b):.4f}")
print(rep.to_csv())
