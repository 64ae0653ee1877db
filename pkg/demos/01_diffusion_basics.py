"""Noise schedules, forward noising and DDIM inversion with closed-form denoisers.

Run: python demos/01_diffusion_basics.py
"""

import numpy as np

from varmia.diffusion import build_schedule, ddim_sample, forward_noise, oracle_denoiser

sched = build_schedule(T=1000, beta_start=1e-4, beta_end=0.02)
print(f"T={sched.T}  abar(1)={sched.abar(1):.6f}  abar(200)={sched.abar(200):.4f}  "
      f"abar(1000)={sched.abar(1000):.2e}")

# A memorized point is recovered exactly from any noise level: the oracle
# predicts exactly the noise that was injected.
rng = np.random.default_rng(0)
x = rng.uniform(0, 1, (1, 16, 16))
model = oracle_denoiser("memorized", sched, points=x[None])
for t in (10, 200, 900):
    x_t = forward_noise(x, t, rng.standard_normal(x.shape), sched)
    x_hat = ddim_sample(x_t, t, k=t // 2 or 1, model=model, sched=sched)
    print(f"t={t:4d}  |x_t - x|_max={np.abs(x_t - x).max():.3f}  "
          f"|x_hat - x|_max={np.abs(x_hat - x).max():.1e}")

# A Gaussian oracle only knows the data distribution, not the point itself,
# so it pulls a noised sample toward the mean instead.
gauss = oracle_denoiser("gaussian", sched, mean=np.full(x.shape, 0.5), var=0.05)
x_t = forward_noise(x, 200, rng.standard_normal(x.shape), sched)
x_hat = ddim_sample(x_t, 200, 100, gauss, sched)
print(f"gaussian oracle: mean |x_hat - x| = {np.abs(x_hat - x).mean():.3f}")
