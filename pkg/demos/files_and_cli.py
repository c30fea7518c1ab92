"""File formats and the command-line pipeline.

Every artifact is plain text with exact float round-tripping: dataset CSVs
with a JSON metadata sidecar, key-value checkpoints, prediction CSVs and
error grids.  The same steps are available as CLI subcommands; this script
drives them in-process and prints the equivalent shell commands.
"""

import os
import tempfile

from epgp import cli, load_checkpoint, load_dataset
from epgp.experiments import predict_checkpoint

workdir = tempfile.mkdtemp(prefix="epgp_demo_")
data = os.path.join(workdir, "train.csv")
ckpt = os.path.join(workdir, "model.ckpt")
grid = os.path.join(workdir, "errors.csv")

steps = [
    ["generate", "--solution", "lowfreq_cos", "--n", "200", "--seed", "3",
     "--out", data],
    ["train", "--mode", "direct", "--data", data, "--m", "10",
     "--iters", "800", "--lr", "1e-2", "--a2-true", "3.0", "--seed", "2",
     "--checkpoint", ckpt],
    ["error-grid", "--checkpoint", ckpt, "--solution", "lowfreq_cos",
     "--t", "0.5", "--res", "25", "--out", grid],
]
for argv in steps:
    print("$ epgp " + " ".join(argv))
    code = cli.main(argv)
    assert code == 0, f"exit code {code}"
    print()

ds = load_dataset(data)
print(f"dataset: n={ds.n}, solution={ds.solution_id}, noise={ds.noise_std}")

model = load_checkpoint(ckpt)
print(f"checkpoint: pde={model.pde_id}, mode={model.mode}, "
      f"{model.weights.shape[0]} weights, a_sq_used={model.a_sq_used}")

pred = predict_checkpoint(model, ds.points[:5])
print("first five in-sample predictions vs observations:")
for p, y in zip(pred, ds.values[:5]):
    print(f"  {p:+.6f}  vs  {y:+.6f}")

print(f"\nartifacts left in {workdir}")
print("benchmark tables run the published experiment matrix, e.g.:")
print("$ epgp benchmark --table T1 --out bench_out --scale 0.5")
