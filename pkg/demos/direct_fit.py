"""Fit a wave-equation solution with the wave speed known.

The model is a finite sum of trigonometric waves whose space-time
frequencies are constrained to the dispersion cone of u_tt = a^2 (u_xx +
u_yy).  With a^2 = 3 fixed, training adjusts the free frequency
coordinates and the per-row prior variances to maximize the marginal
likelihood of the samples.  Run time is around half a minute.
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

spec = make_spec("wave2d")
train = generate_dataset("lowfreq_cos", n=100, noise_std=0.0, seed=5)
held_out = generate_dataset("lowfreq_cos", n=2000, noise_std=0.0, seed=1_000_005)

# The true solution cos(x - sqrt(3) t) + cos(y - sqrt(3) t) needs the
# spatial frequencies (1, 0) and (0, 1) up to sign (each row's cos/sin
# pair covers z and -z alike); ten standard-normal draws land close
# enough to both basins for this seed.
cfg = TrainConfig(mode="direct", m=10, iters=20000, lr=1e-3, seed=5)
report = train_direct(train, spec, PdeParam(3.0), cfg)

pred = predict(report.posterior, held_out.points, spec)
print(f"loss: first {report.loss_trace[0]:.2f} -> best {report.best_loss:.2f}")
print(f"held-out RMSE: {rmse(pred, held_out.values):.3e}")

z = report.state.z_free
targets = np.array([[1, 0], [0, 1]], float)
print("distance of nearest learned frequency to each target (up to sign):")
for tgt in targets:
    d = min(
        np.linalg.norm(z - tgt, axis=1).min(),
        np.linalg.norm(z + tgt, axis=1).min(),
    )
    print(f"  ({tgt[0]:+.0f},{tgt[1]:+.0f}): {d:.2e}")
