"""Black-box membership inference against diffusion models through a
variation API, with toy targets, metrics and theory checks."""

__version__ = "0.1.0"

from .attack import (AttackRecord, classify_membership, dist_lp, dist_ssim,
                     loss_baseline_score, rediffuse_plus_score, rediffuse_score,
                     train_distance_classifier)
from .diffusion import (build_schedule, ddim_sample, ddim_step, ddpm_step,
                        forward_noise, oracle_denoiser)
from .metrics import asr, auc, auc_oracle, roc_curve, summarize, tpr_at_fpr
from .seeding import derive_seed
from .variation import (LatentEndpoint, LocalEndpoint, RemoteEndpoint,
                        variation_latent, variation_local, variation_remote)

__all__ = [
    "AttackRecord", "LatentEndpoint", "LocalEndpoint", "RemoteEndpoint", "asr",
    "auc", "auc_oracle", "build_schedule", "classify_membership", "ddim_sample",
    "ddim_step", "ddpm_step", "derive_seed", "dist_lp", "dist_ssim",
    "forward_noise", "loss_baseline_score", "oracle_denoiser",
    "rediffuse_plus_score", "rediffuse_score", "roc_curve", "summarize",
    "tpr_at_fpr", "train_distance_classifier", "variation_latent",
    "variation_local", "variation_remote",
]
