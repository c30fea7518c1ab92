"""Synthetic wave-equation experiments, file formats and benchmarks.

Ships three closed-form solutions of ``u_tt = a_sq (u_xx + u_yy)`` on the
box [-6, 6] x [-6, 6] x [0, 12], dataset generation with optional Gaussian
observation noise, error metrics, a text checkpoint format that round-trips
floats exactly, error-grid export and a benchmark harness reproducing the
reference experiment matrix (tables T1, T2, T3).

All randomness flows through explicit integer seeds, so every artifact here
is reproducible byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, IO

import numpy as np

from .errors import (
    CheckpointError,
    ConfigurationError,
    EpgpError,
    InvalidArgumentError,
)
from .likelihood import ModelState, Posterior, predict
from .training import (
    TrainConfig,
    TrainReport,
    train_direct,
    train_inverse_joint,
    train_inverse_staged,
)
from .variety import PdeParam, make_spec

SQRT3 = math.sqrt(3.0)

DEFAULT_DOMAIN = ((-6.0, 6.0), (-6.0, 6.0), (0.0, 12.0))

CHECKPOINT_MAGIC = "epgp_checkpoint"
CHECKPOINT_VERSION = 1

# Seed offset separating held-out evaluation draws from training draws.
TEST_SEED_OFFSET = 1_000_000


@dataclass(frozen=True)
class TrueSolution:
    """A closed-form PDE solution used to manufacture data.

    ``func`` maps an (n, 3) array of (x, y, t) points to solution values.
    ``a_sq`` is the squared wave speed the solution satisfies.
    """

    solution_id: str
    pde_id: str
    a_sq: float
    expression: str
    func: Callable[[np.ndarray], np.ndarray]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.func(pts)


def _lowfreq(pts: np.ndarray) -> np.ndarray:
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    return np.cos(x - SQRT3 * t) + np.cos(y - SQRT3 * t)


def _poly_sq(pts: np.ndarray) -> np.ndarray:
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    return (x + y - SQRT3 * t) ** 2


def _highfreq(pts: np.ndarray) -> np.ndarray:
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    return np.cos(3.0 * (x - SQRT3 * t)) + np.cos(6.0 * (y - SQRT3 * t))


SOLUTIONS: dict[str, TrueSolution] = {
    "lowfreq_cos": TrueSolution(
        "lowfreq_cos", "wave2d", 3.0,
        "cos(x - sqrt(3) t) + cos(y - sqrt(3) t)", _lowfreq,
    ),
    "poly_sq": TrueSolution(
        "poly_sq", "wave2d", 1.5,
        "(x + y - sqrt(3) t)**2", _poly_sq,
    ),
    "highfreq_cos": TrueSolution(
        "highfreq_cos", "wave2d", 3.0,
        "cos(3 (x - sqrt(3) t)) + cos(6 (y - sqrt(3) t))", _highfreq,
    ),
}


def get_solution(solution_id: str) -> TrueSolution:
    try:
        return SOLUTIONS[solution_id]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown solution {solution_id!r}; expected one of "
            f"{sorted(SOLUTIONS)}"
        ) from None


@dataclass(frozen=True)
class Dataset:
    """Sampled observations of one solution.

    ``values`` are solution values plus i.i.d. Gaussian noise of standard
    deviation ``noise_std`` (exactly the solution when ``noise_std`` is 0).
    """

    points: np.ndarray
    values: np.ndarray
    solution_id: str | None
    noise_std: float
    seed: int | None
    domain: tuple = DEFAULT_DOMAIN

    @property
    def n(self) -> int:
        return self.points.shape[0]


def generate_dataset(
    solution: TrueSolution | str,
    n: int,
    noise_std: float = 0.0,
    seed: int = 0,
    domain: tuple = DEFAULT_DOMAIN,
) -> Dataset:
    """Sample ``n`` uniform points in the domain and observe the solution.

    Points are drawn first, then the noise vector, so a fixed seed pins both
    regardless of later use.  Deterministic per (solution, n, noise_std,
    seed, domain).
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if noise_std < 0:
        raise InvalidArgumentError(f"noise_std must be >= 0, got {noise_std}")
    sol = get_solution(solution) if isinstance(solution, str) else solution
    rng = np.random.default_rng(seed)
    lo = np.array([d[0] for d in domain])
    hi = np.array([d[1] for d in domain])
    if np.any(hi <= lo):
        raise InvalidArgumentError(f"empty domain {domain}")
    points = rng.uniform(lo, hi, size=(n, len(domain)))
    values = sol.evaluate(points)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=n)
    return Dataset(
        points=points,
        values=values,
        solution_id=sol.solution_id,
        noise_std=float(noise_std),
        seed=seed,
        domain=tuple(tuple(d) for d in domain),
    )


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Square root of the average squared difference."""
    p, q = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(np.sqrt(np.mean((p - q) ** 2)))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    """Average of the absolute differences."""
    p, q = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(np.mean(np.abs(p - q)))


# ---------------------------------------------------------------------------
# File formats


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_dataset(ds: Dataset, path: str) -> None:
    """Write points and values as CSV plus a JSON metadata sidecar.

    The CSV has header ``x,y,t,Y`` and one point per row; floats use their
    shortest round-tripping representation.  Metadata (solution id, noise
    std, seed, domain) goes to ``<path>.meta.json``.
    """
    lines = ["x,y,t,Y"]
    for row, y in zip(ds.points, ds.values):
        lines.append(",".join(repr(float(v)) for v in (*row, y)))
    _atomic_write_text(path, "\n".join(lines) + "\n")
    meta = {
        "solution_id": ds.solution_id,
        "noise_std": ds.noise_std,
        "seed": ds.seed,
        "domain": ds.domain,
        "n": ds.n,
    }
    _atomic_write_text(path + ".meta.json", json.dumps(meta, indent=2) + "\n")


def load_dataset(path: str) -> Dataset:
    """Read a dataset CSV written by :func:`save_dataset`.

    The metadata sidecar is optional; without it the solution id and seed
    are unknown (None) and noise_std is reported as 0.
    """
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigurationError(f"cannot read dataset {path!r}: {exc}") from exc
    if not lines or lines[0].replace(" ", "") != "x,y,t,Y":
        raise ConfigurationError(
            f"dataset {path!r} must start with header 'x,y,t,Y'"
        )
    try:
        data = np.array(
            [[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float
        )
    except ValueError as exc:
        raise ConfigurationError(f"bad number in dataset {path!r}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 4:
        raise ConfigurationError(f"dataset {path!r} must have 4 columns")
    meta_path = path + ".meta.json"
    solution_id, noise_std, seed, domain = None, 0.0, None, DEFAULT_DOMAIN
    if os.path.exists(meta_path):
        try:
            with open(meta_path) as fh:
                meta = json.load(fh)
            solution_id = meta.get("solution_id")
            noise_std = float(meta.get("noise_std", 0.0))
            seed = meta.get("seed")
            domain = tuple(tuple(d) for d in meta.get("domain", DEFAULT_DOMAIN))
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigurationError(
                f"bad dataset metadata {meta_path!r}: {exc}"
            ) from exc
    return Dataset(
        points=data[:, :3],
        values=data[:, 3],
        solution_id=solution_id,
        noise_std=noise_std,
        seed=seed,
        domain=domain,
    )


@dataclass(frozen=True)
class ModelCheckpoint:
    """A trained model in serializable form.

    ``a_sq_used`` is the squared parameter the basis was built with (always
    set for wave models, including direct ones); ``state.a_sq`` is set only
    when the parameter was trained.  ``config_hash`` fingerprints the
    producing run configuration.
    """

    pde_id: str
    ambient_dim: int
    state: ModelState
    weights: np.ndarray
    a_sq_used: float | None
    mode: str | None = None
    solution_id: str | None = None
    config_hash: str | None = None
    format_version: int = CHECKPOINT_VERSION


def checkpoint_from_report(
    report: TrainReport,
    pde_id: str,
    ambient_dim: int,
    solution_id: str | None = None,
    config_hash: str | None = None,
) -> ModelCheckpoint:
    """Bundle a training report's best state and weights for serialization."""
    post = report.posterior
    return ModelCheckpoint(
        pde_id=pde_id,
        ambient_dim=ambient_dim,
        state=post.state_snapshot,
        weights=np.asarray(post.weights, dtype=float),
        a_sq_used=post.a_sq_used,
        mode=report.mode,
        solution_id=solution_id,
        config_hash=config_hash,
    )


def _fmt_floats(arr: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in arr)


def save_checkpoint(ckpt: ModelCheckpoint, path: str) -> None:
    """Write a checkpoint as versioned key-value text (atomic).

    Floats are stored in shortest round-tripping decimal form, so a
    save/load cycle reproduces every value bit for bit.
    """
    st = ckpt.state
    out = [f"{CHECKPOINT_MAGIC} {ckpt.format_version}"]
    out.append(f"str pde_id {ckpt.pde_id}")
    out.append(f"int ambient_dim {ckpt.ambient_dim}")
    if ckpt.mode is not None:
        out.append(f"str mode {ckpt.mode}")
    if ckpt.solution_id is not None:
        out.append(f"str solution_id {ckpt.solution_id}")
    if ckpt.config_hash is not None:
        out.append(f"str config_hash {ckpt.config_hash}")
    if st.a_sq is not None:
        out.append(f"float a_sq {st.a_sq!r}")
    if ckpt.a_sq_used is not None:
        out.append(f"float a_sq_used {ckpt.a_sq_used!r}")
    out.append(f"float log_sigma0_sq {st.log_sigma0_sq!r}")
    m, fd = st.z_free.shape
    out.append(f"array z_free {m} {fd}")
    for row in st.z_free:
        out.append(_fmt_floats(row))
    out.append(f"array log_sigma_j_sq {st.log_sigma_j_sq.shape[0]}")
    out.append(_fmt_floats(st.log_sigma_j_sq))
    out.append(f"array weights {ckpt.weights.shape[0]}")
    out.append(_fmt_floats(ckpt.weights))
    _atomic_write_text(path, "\n".join(out) + "\n")


def load_checkpoint(path: str) -> ModelCheckpoint:
    """Parse a checkpoint file, validating magic, version and layout."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path!r}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise CheckpointError(f"checkpoint {path!r} is empty")
    head = lines[0].split()
    if len(head) != 2 or head[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path!r} is not a checkpoint file")
    try:
        version = int(head[1])
    except ValueError:
        raise CheckpointError(f"bad checkpoint version line {lines[0]!r}") from None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} "
            f"(supported: {CHECKPOINT_VERSION})"
        )
    strs: dict[str, str] = {}
    floats: dict[str, float] = {}
    ints: dict[str, int] = {}
    arrays: dict[str, np.ndarray] = {}
    i = 1
    try:
        while i < len(lines):
            kind, name, *rest = lines[i].split(" ", 2)
            if kind == "str":
                strs[name] = rest[0]
                i += 1
            elif kind == "int":
                ints[name] = int(rest[0])
                i += 1
            elif kind == "float":
                floats[name] = float(rest[0])
                i += 1
            elif kind == "array":
                dims = [int(v) for v in rest[0].split()]
                if len(dims) == 1:
                    vals = [float(v) for v in lines[i + 1].split()]
                    if len(vals) != dims[0]:
                        raise CheckpointError(
                            f"array {name!r} expects {dims[0]} values, "
                            f"got {len(vals)}"
                        )
                    arrays[name] = np.array(vals)
                    i += 2
                else:
                    rows, cols = dims
                    block = lines[i + 1 : i + 1 + rows]
                    if len(block) != rows:
                        raise CheckpointError(f"array {name!r} is truncated")
                    mat = np.array(
                        [[float(v) for v in ln.split()] for ln in block]
                    )
                    if mat.shape != (rows, cols):
                        raise CheckpointError(
                            f"array {name!r} expects shape {(rows, cols)}, "
                            f"got {mat.shape}"
                        )
                    arrays[name] = mat
                    i += 1 + rows
            else:
                raise CheckpointError(f"unknown record kind {kind!r}")
    except CheckpointError:
        raise
    except (ValueError, IndexError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path!r}: {exc}") from exc
    for required in ("z_free", "log_sigma_j_sq", "weights"):
        if required not in arrays:
            raise CheckpointError(f"checkpoint {path!r} lacks array {required!r}")
    if "pde_id" not in strs or "log_sigma0_sq" not in floats:
        raise CheckpointError(f"checkpoint {path!r} lacks required fields")
    state = ModelState(
        a_sq=floats.get("a_sq"),
        z_free=arrays["z_free"],
        log_sigma_j_sq=arrays["log_sigma_j_sq"],
        log_sigma0_sq=floats["log_sigma0_sq"],
    )
    if arrays["weights"].shape != arrays["log_sigma_j_sq"].shape:
        raise CheckpointError(
            f"checkpoint {path!r}: weights/variances length mismatch"
        )
    return ModelCheckpoint(
        pde_id=strs["pde_id"],
        ambient_dim=ints.get("ambient_dim", 3),
        state=state,
        weights=arrays["weights"],
        a_sq_used=floats.get("a_sq_used"),
        mode=strs.get("mode"),
        solution_id=strs.get("solution_id"),
        config_hash=strs.get("config_hash"),
    )


def posterior_from_checkpoint(ckpt: ModelCheckpoint) -> Posterior:
    """Rebuild a prediction-ready Posterior from a checkpoint.

    The Cholesky factor is not stored in files; prediction only needs the
    weights, so a 1x1 placeholder stands in for it.
    """
    return Posterior(
        chol_A=np.ones((1, 1)),
        weights=ckpt.weights,
        state_snapshot=ckpt.state,
        a_sq_used=ckpt.a_sq_used,
    )


def predict_checkpoint(ckpt: ModelCheckpoint, points: np.ndarray) -> np.ndarray:
    spec = make_spec(ckpt.pde_id, ckpt.ambient_dim if ckpt.pde_id == "free" else None)
    return predict(posterior_from_checkpoint(ckpt), points, spec)


def export_error_grid(
    ckpt: ModelCheckpoint,
    solution: TrueSolution | str,
    t_slice: float,
    grid_resolution: int,
    out_path: str | None = None,
    domain: tuple = DEFAULT_DOMAIN,
) -> np.ndarray:
    """Prediction-minus-truth on a regular x, y grid at fixed t.

    Returns an array of rows (x, y, err) in row-major order (x outer, y
    inner) and, when ``out_path`` is given, writes it as CSV with header
    ``x,y,err``.  Raises ConfigurationError when the checkpoint records a
    different solution than requested.
    """
    if grid_resolution < 2:
        raise InvalidArgumentError(
            f"grid_resolution must be >= 2, got {grid_resolution}"
        )
    sol = get_solution(solution) if isinstance(solution, str) else solution
    if ckpt.solution_id is not None and ckpt.solution_id != sol.solution_id:
        raise ConfigurationError(
            f"checkpoint was trained on {ckpt.solution_id!r}, "
            f"requested grid for {sol.solution_id!r}"
        )
    xs = np.linspace(domain[0][0], domain[0][1], grid_resolution)
    ys = np.linspace(domain[1][0], domain[1][1], grid_resolution)
    X, Ygrid = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack(
        [X.ravel(), Ygrid.ravel(), np.full(X.size, float(t_slice))]
    )
    pred = predict_checkpoint(ckpt, pts)
    truth = sol.evaluate(pts)
    err = pred - truth
    out = np.column_stack([pts[:, 0], pts[:, 1], err])
    if out_path is not None:
        lines = ["x,y,err"]
        for row in out:
            lines.append(",".join(repr(float(v)) for v in row))
        _atomic_write_text(out_path, "\n".join(lines) + "\n")
    return out


# ---------------------------------------------------------------------------
# Benchmark harness


@dataclass(frozen=True)
class BenchRow:
    """One benchmark experiment: data scale, mode and reference errors."""

    table: str
    solution_id: str
    mode: str
    n: int
    m: int
    noise_std: float
    a_sq_init: float | None
    ref_rmse: float
    ref_mae: float
    ref_a_sq: float | None
    iters: int = 3000
    lr: float = 1e-2
    stage1_iters: int = 400
    stage1_lr: float | None = None
    stage1_tol: float = 0.05
    max_restarts: int = 5
    seed: int = 7
    data_seed: int | None = None


# Reference errors and recovered parameters for the published experiment
# matrix; ratios against these flag regressions.
BENCH_TABLES: dict[str, list[BenchRow]] = {
    "T1": [
        BenchRow("T1", "lowfreq_cos", "direct", 100, 10, 0.0, None,
                 7.91e-7, 9.20e-7, None, iters=60000, lr=1e-3, seed=5),
        BenchRow("T1", "lowfreq_cos", "inverse_joint", 1000, 100, 0.0, 1.0,
                 5.63e-5, 7.65e-5, 3.0002, iters=8000, lr=1e-2, seed=7),
    ],
    "T2": [
        BenchRow("T2", "lowfreq_cos", "direct", 10000, 1000, 0.0, None,
                 3.067e-8, 1.065e-8, None),
        BenchRow("T2", "lowfreq_cos", "inverse_joint", 10000, 1000, 0.0, 1.0,
                 5.632e-5, 7.647e-5, 3.0002),
        BenchRow("T2", "poly_sq", "direct", 1000, 100, 0.0, None,
                 3.459e-4, 9.410e-5, None, iters=6000, lr=1e-2, seed=7),
        BenchRow("T2", "poly_sq", "inverse_joint", 1000, 100, 0.0, 1.0,
                 3.006e-4, 1.0e-4, 1.5018, iters=6000, lr=1e-2, seed=7),
        BenchRow("T2", "highfreq_cos", "direct", 10000, 1000, 0.0, None,
                 2.483e-7, 2.099e-7, None, iters=30000, lr=0.3, seed=53),
        BenchRow("T2", "highfreq_cos", "inverse_staged", 10000, 1000, 0.0, 2.0,
                 3.508e-5, 1.744e-5, 2.9999, iters=30000, lr=0.3, seed=53,
                 data_seed=7, stage1_iters=300, stage1_lr=1e-2, stage1_tol=1.0),
    ],
    "T3": [
        BenchRow("T3", "lowfreq_cos", "direct", 10000, 1000, 1e-3, None,
                 9.868e-4, 8e-4, None, iters=5000),
        BenchRow("T3", "lowfreq_cos", "inverse_joint", 10000, 1000, 1e-3, 1.0,
                 9.812e-4, 8e-4, 2.99989, iters=5000),
        BenchRow("T3", "highfreq_cos", "direct", 10000, 1000, 1e-3, None,
                 8.254e-4, 9e-4, None, iters=30000, lr=0.3, seed=53),
        BenchRow("T3", "highfreq_cos", "inverse_staged", 10000, 1000, 1e-3, 2.0,
                 1.095e-3, 8e-4, 2.99999, iters=30000, lr=0.3, seed=53,
                 data_seed=7, stage1_iters=300, stage1_lr=1e-2, stage1_tol=1.0),
    ],
}

_BENCH_COLUMNS = [
    "table", "solution", "mode", "n", "m", "noise_std", "seed",
    "iters", "lr", "status", "rmse", "mae", "a_sq",
    "ref_rmse", "ref_mae", "ref_a_sq", "rmse_ratio", "mae_ratio",
    "converged", "restarts",
]


def run_case(
    solution: TrueSolution | str,
    mode: str,
    n: int,
    m: int,
    noise_std: float = 0.0,
    seed: int = 7,
    n_test: int = 2000,
    data_seed: int | None = None,
    **cfg_overrides,
) -> dict:
    """Generate data, train one model and score it on held-out points.

    Returns a dict with keys ``rmse``, ``mae``, ``a_sq``, ``report``.
    ``cfg_overrides`` feed extra :class:`TrainConfig` fields (iters, lr,
    stage controls, ...).  ``data_seed`` decouples the sampled point set
    from the optimizer initialization; by default both share ``seed``.
    The held-out sample uses a disjoint seed and no noise, so scores
    measure distance to the true solution.
    """
    sol = get_solution(solution) if isinstance(solution, str) else solution
    spec = make_spec(sol.pde_id)
    ds_seed = seed if data_seed is None else data_seed
    train_ds = generate_dataset(sol, n, noise_std, ds_seed)
    test_ds = generate_dataset(sol, n_test, 0.0, ds_seed + TEST_SEED_OFFSET)
    cfg_kwargs = dict(mode=mode, m=m, seed=seed)
    cfg_kwargs.update(cfg_overrides)
    if mode == "direct":
        cfg = TrainConfig(**cfg_kwargs)
        report = train_direct(train_ds, spec, PdeParam(sol.a_sq), cfg)
    elif mode == "inverse_joint":
        cfg_kwargs.setdefault("a_sq_init", 1.0)
        cfg = TrainConfig(**cfg_kwargs)
        report = train_inverse_joint(train_ds, spec, cfg)
    elif mode == "inverse_staged":
        cfg_kwargs.setdefault("a_sq_init", 1.0)
        cfg_kwargs.setdefault("a_sq_true", sol.a_sq)
        cfg = TrainConfig(**cfg_kwargs)
        report = train_inverse_staged(train_ds, spec, cfg)
    else:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    pred = predict(report.posterior, test_ds.points, spec)
    truth = test_ds.values
    return {
        "rmse": rmse(pred, truth),
        "mae": mae(pred, truth),
        "a_sq": report.state.a_sq,
        "report": report,
        "spec": spec,
        "train_ds": train_ds,
    }


def _scaled(row: BenchRow, scale: float) -> tuple[int, int]:
    n = max(50, int(round(row.n * scale)))
    m = max(5, int(round(row.m * scale)))
    return n, m


def _row_result(row: BenchRow, scale: float, out: dict | None, error: str | None):
    n, m = _scaled(row, scale)
    res = {
        "table": row.table,
        "solution": row.solution_id,
        "mode": row.mode,
        "n": n,
        "m": m,
        "noise_std": row.noise_std,
        "seed": row.seed,
        "iters": row.iters,
        "lr": row.lr,
        "status": "ok" if error is None else f"failed: {error}",
        "rmse": out["rmse"] if out else None,
        "mae": out["mae"] if out else None,
        "a_sq": out["a_sq"] if out else None,
        "ref_rmse": row.ref_rmse,
        "ref_mae": row.ref_mae,
        "ref_a_sq": row.ref_a_sq,
        "rmse_ratio": (out["rmse"] / row.ref_rmse) if out else None,
        "mae_ratio": (out["mae"] / row.ref_mae) if out else None,
        "converged": out["report"].converged if out else None,
        "restarts": out["report"].restarts if out else None,
    }
    return res


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows_csv(rows: list[dict], path: str) -> None:
    lines = [",".join(_BENCH_COLUMNS)]
    for r in rows:
        lines.append(",".join(_format_cell(r[c]) for c in _BENCH_COLUMNS))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def run_benchmark(
    table: str,
    out_dir: str,
    scale: float = 1.0,
    stream: IO[str] | None = None,
) -> list[dict]:
    """Run one benchmark table, appending each row to ``<out_dir>/<table>.csv``.

    ``scale`` shrinks every row's n and m proportionally (floors 50 and 5)
    so the full matrix stays tractable in constrained environments; the
    reported reference values are for scale 1.  A failing row records its
    error and the run continues.  The CSV is rewritten atomically after
    every completed row.
    """
    if table not in BENCH_TABLES:
        raise InvalidArgumentError(
            f"unknown table {table!r}; expected one of {sorted(BENCH_TABLES)}"
        )
    if scale <= 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")
    os.makedirs(out_dir, exist_ok=True)
    stream = stream if stream is not None else sys.stdout
    path = os.path.join(out_dir, f"{table}.csv")
    rows: list[dict] = []
    for row in BENCH_TABLES[table]:
        n, m = _scaled(row, scale)
        stream.write(
            f"[{row.table}] {row.solution_id} {row.mode} n={n} m={m} "
            f"noise={row.noise_std} ...\n"
        )
        stream.flush()
        try:
            out = run_case(
                row.solution_id, row.mode, n, m, row.noise_std, row.seed,
                data_seed=row.data_seed,
                iters=row.iters, lr=row.lr,
                a_sq_init=row.a_sq_init,
                stage1_iters=row.stage1_iters,
                stage1_lr=row.stage1_lr,
                stage1_tol=row.stage1_tol,
                max_restarts=row.max_restarts,
            ) if row.mode != "direct" else run_case(
                row.solution_id, row.mode, n, m, row.noise_std, row.seed,
                data_seed=row.data_seed,
                iters=row.iters, lr=row.lr,
            )
            res = _row_result(row, scale, out, None)
            stream.write(
                f"    rmse={out['rmse']:.3e} mae={out['mae']:.3e} "
                f"a_sq={out['a_sq']} (refs {row.ref_rmse:.3e}/{row.ref_mae:.3e})\n"
            )
        except EpgpError as exc:
            res = _row_result(row, scale, None, str(exc))
            stream.write(f"    FAILED: {exc}\n")
        rows.append(res)
        _write_rows_csv(rows, path)
    return rows


def config_hash(cfg: TrainConfig, extra: dict | None = None) -> str:
    """Short stable fingerprint of a training configuration."""
    payload = dataclasses.asdict(cfg)
    if extra:
        payload.update(extra)
    canon = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
