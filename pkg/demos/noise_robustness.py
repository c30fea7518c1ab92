"""Recover a solution and its observation-noise level from noisy samples.

Observations carry i.i.d. Gaussian noise of standard deviation 1e-3.  The
noise variance sigma0^2 is a trained hyperparameter, so a successful fit
both denoises the prediction (error near the noise floor, far below the
per-sample noise) and reports the noise level it found.
"""

import numpy as np

from epgp import (
    PdeParam,
    TrainConfig,
    generate_dataset,
    make_spec,
    predict,
    rmse,
    train_direct,
)

NOISE = 1e-3

spec = make_spec("wave2d")
train = generate_dataset("lowfreq_cos", n=400, noise_std=NOISE, seed=7)
held_out = generate_dataset("lowfreq_cos", n=2000, noise_std=0.0, seed=1_000_007)

cfg = TrainConfig(mode="direct", m=40, iters=3000, lr=1e-2, seed=7)
report = train_direct(train, spec, PdeParam(3.0), cfg)

pred = predict(report.posterior, held_out.points, spec)
sigma0 = float(np.exp(report.state.log_sigma0_sq))
print(f"observation noise: true std {NOISE:.1e}")
print(f"recovered noise std: {np.sqrt(sigma0):.2e}")
print(f"held-out RMSE vs clean solution: {rmse(pred, held_out.values):.3e}")
print("(error well below the 1e-3 per-sample noise: the fit denoises)")
