"""Adaptive-moment training loops for the marginal likelihood.

Three modes share one engine:

* direct: the PDE parameter is known and fixed; frequencies and variances
  are trained.
* inverse_joint: the squared parameter is trained jointly with everything
  else, in log space to stay positive.
* inverse_staged: the squared parameter is trained alone first (all other
  parameters frozen at their initialization); if its landing point fails the
  stage-1 criterion the free frequencies are resampled and stage 1 restarts,
  up to ``max_restarts`` times, after which stage 2 trains all parameters
  jointly from the stage-1 result.

The loops are deterministic for a fixed (data, config, seed): frequency
initializations derive from ``seed`` (restart ``r`` uses ``seed + r``), and
no other randomness enters.  Every iteration appends a progress record
``label iteration loss a_sq`` to an optional log stream.

Variance and parameter logs are clamped to a wide numerical box after each
step so the Cholesky factorization stays inside its safe domain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .basis import build_phi
from .errors import ConfigurationError, InvalidArgumentError, NumericalError
from .likelihood import (
    ModelState,
    Posterior,
    nlml_value_and_gradient,
    posterior,
)
from .variety import PdeParam, VarietySpec, sample_free_frequencies

MODES = ("direct", "inverse_joint", "inverse_staged")

# Numerical safety box (log scale).  Wide enough not to bind in normal runs;
# keeps A = phi phi^T + sigma0_sq Sigma^{-1} factorizable in float64.
LOG_SIGMA_J_SQ_BOUNDS = (-30.0, 14.0)
LOG_SIGMA0_SQ_BOUNDS = (float(np.log(1e-12)), 7.0)
LOG_A_SQ_BOUNDS = (-10.0, 10.0)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    """First and second moment accumulators."""

    m: np.ndarray
    v: np.ndarray

    @staticmethod
    def zeros(size: int) -> "AdamState":
        return AdamState(np.zeros(size), np.zeros(size))


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    moments: AdamState,
    lr: float,
    t: int,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, AdamState]:
    """One adaptive-moment update; ``t`` is the 1-based step index.

    From zero moments the first step is ``-lr * g / (|g| + eps)``, and under
    a constant gradient the step magnitude approaches ``lr``.
    """
    if t < 1:
        raise InvalidArgumentError(f"step index t must be >= 1, got {t}")
    m = beta1 * moments.m + (1.0 - beta1) * grads
    v = beta2 * moments.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v)


@dataclass(frozen=True)
class TrainConfig:
    """Settings for one training run.

    ``iters`` is the iteration budget of one training attempt; in the
    staged mode stage 1 spends ``stage1_iters`` of it and stage 2 runs the
    remainder, so the total trace never exceeds ``iters`` per attempt.
    ``a_sq_init`` seeds the inverse modes.  ``a_sq_true``, when given,
    switches the staged stage-1 criterion to benchmark mode (success when
    the best-loss landing is within ``stage1_tol`` of the truth); without it the
    blind criterion is used: the per-iteration change of ``a_sq`` stays
    below 1e-8 for 50 consecutive iterations and the stage-1 loss improved
    by at least 1 percent.  ``stage1_lr`` overrides the step size for the
    scalar stage-1 search (stage 2 always uses ``lr``); leave it None to
    share ``lr`` across both stages.  ``convergence_tol`` > 0 enables early
    stopping when the best loss stops improving by that relative amount
    over a 100-iteration window.
    """

    mode: str
    m: int
    iters: int = 3000
    lr: float = 1e-2
    seed: int = 0
    a_sq_init: float | None = None
    a_sq_true: float | None = None
    stage1_iters: int = 400
    stage1_lr: float | None = None
    stage1_tol: float = 1e-6
    max_restarts: int = 5
    convergence_tol: float = 0.0
    sigma_sq_init: float = 1.0
    sigma0_sq_init: float = 1e-2

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(
                f"mode must be one of {MODES}, got {self.mode!r}"
            )
        if self.m < 1:
            raise InvalidArgumentError(f"m must be >= 1, got {self.m}")
        if self.iters < 1:
            raise InvalidArgumentError(f"iters must be >= 1, got {self.iters}")
        if self.lr <= 0:
            raise InvalidArgumentError(f"lr must be positive, got {self.lr}")
        if self.stage1_iters < 1:
            raise InvalidArgumentError(
                f"stage1_iters must be >= 1, got {self.stage1_iters}"
            )
        if self.stage1_lr is not None and self.stage1_lr <= 0:
            raise InvalidArgumentError(
                f"stage1_lr must be positive, got {self.stage1_lr}"
            )
        if self.stage1_tol <= 0:
            raise InvalidArgumentError(
                f"stage1_tol must be positive, got {self.stage1_tol}"
            )
        if self.mode == "inverse_staged" and self.stage1_iters >= self.iters:
            raise InvalidArgumentError(
                "stage1_iters must be smaller than iters (stage 1 spends "
                f"part of the budget), got {self.stage1_iters} >= {self.iters}"
            )
        if self.max_restarts < 0:
            raise InvalidArgumentError(
                f"max_restarts must be >= 0, got {self.max_restarts}"
            )
        if self.convergence_tol < 0:
            raise InvalidArgumentError(
                f"convergence_tol must be >= 0, got {self.convergence_tol}"
            )
        if self.sigma_sq_init <= 0 or self.sigma0_sq_init <= 0:
            raise InvalidArgumentError("variance initializations must be positive")
        if self.mode != "direct" and self.a_sq_init is None:
            raise InvalidArgumentError(f"mode {self.mode!r} requires a_sq_init")
        if self.a_sq_init is not None and self.a_sq_init <= 0:
            raise InvalidArgumentError(
                f"a_sq_init must be positive, got {self.a_sq_init}"
            )


@dataclass
class TrainReport:
    """Outcome of a training run.

    ``state`` is the best-loss state seen (so its loss never exceeds the
    first loss of its segment) and ``posterior`` is evaluated there.
    ``loss_trace`` and ``a_sq_trace`` concatenate all segments run;
    ``segment_bounds``/``segment_labels`` give each segment's start index.
    """

    state: ModelState
    posterior: Posterior
    loss_trace: np.ndarray
    a_sq_trace: np.ndarray | None
    restarts: int
    converged: bool
    wall_time_s: float
    mode: str
    segment_bounds: list[int] = field(default_factory=list)
    segment_labels: list[str] = field(default_factory=list)

    @property
    def best_loss(self) -> float:
        return float(np.min(self.loss_trace))


def _points_values(data) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(data, "points") and hasattr(data, "values"):
        pts, vals = data.points, data.values
    else:
        pts, vals = data
    pts = np.asarray(pts, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if pts.ndim != 2 or vals.ndim != 1 or pts.shape[0] != vals.shape[0]:
        raise InvalidArgumentError(
            f"inconsistent data shapes {pts.shape} / {vals.shape}"
        )
    return pts, vals


def _initial_state(
    spec: VarietySpec, cfg: TrainConfig, seed: int, with_a: bool
) -> ModelState:
    z0 = sample_free_frequencies(spec, cfg.m, seed)
    p = 2 * spec.branch_count * cfg.m
    return ModelState(
        a_sq=cfg.a_sq_init if with_a else None,
        z_free=z0,
        log_sigma_j_sq=np.full(p, np.log(cfg.sigma_sq_init)),
        log_sigma0_sq=float(np.log(cfg.sigma0_sq_init)),
    )


class _Packer:
    """Flatten a ModelState's trainable fields into one vector."""

    def __init__(self, state: ModelState, trainable: Sequence[str]):
        self.has_a = state.a_sq is not None
        self.z_shape = state.z_free.shape
        self.p = state.log_sigma_j_sq.shape[0]
        n_z = int(np.prod(self.z_shape))
        size = (1 if self.has_a else 0) + n_z + self.p + 1
        self.size = size
        mask = np.zeros(size)
        pos = 0
        if self.has_a:
            if "a" in trainable:
                mask[pos] = 1.0
            pos += 1
        if "z" in trainable:
            mask[pos : pos + n_z] = 1.0
        pos += n_z
        if "sigma" in trainable:
            mask[pos : pos + self.p] = 1.0
        pos += self.p
        if "noise" in trainable:
            mask[pos] = 1.0
        self.mask = mask
        self.n_z = n_z

    def pack_state(self, state: ModelState) -> np.ndarray:
        parts = []
        if self.has_a:
            parts.append([np.log(state.a_sq)])
        parts.append(state.z_free.ravel())
        parts.append(state.log_sigma_j_sq)
        parts.append([state.log_sigma0_sq])
        return np.concatenate([np.asarray(q, dtype=float) for q in parts])

    def pack_grad(self, state: ModelState, grad) -> np.ndarray:
        parts = []
        if self.has_a:
            # Chain rule: the optimizer works in log(a_sq).
            parts.append([state.a_sq * grad.a_sq])
        parts.append(grad.z_free.ravel())
        parts.append(grad.log_sigma_j_sq)
        parts.append([grad.log_sigma0_sq])
        return np.concatenate([np.asarray(q, dtype=float) for q in parts])

    def unpack(self, vec: np.ndarray) -> ModelState:
        pos = 0
        a_sq = None
        if self.has_a:
            a_sq = float(np.exp(np.clip(vec[0], *LOG_A_SQ_BOUNDS)))
            pos = 1
        z = vec[pos : pos + self.n_z].reshape(self.z_shape)
        pos += self.n_z
        ls = np.clip(vec[pos : pos + self.p], *LOG_SIGMA_J_SQ_BOUNDS)
        pos += self.p
        ls0 = float(np.clip(vec[pos], *LOG_SIGMA0_SQ_BOUNDS))
        return ModelState(
            a_sq=a_sq, z_free=z, log_sigma_j_sq=ls, log_sigma0_sq=ls0
        )


@dataclass
class _SegmentResult:
    best_state: ModelState
    best_loss: float
    final_state: ModelState
    losses: list[float]
    a_values: list[float]


def _emit(log_stream: IO[str] | None, label: str, it: int, loss: float, a) -> None:
    if log_stream is None:
        return
    a_repr = "-" if a is None else repr(float(a))
    log_stream.write(f"{label}\t{it}\t{loss!r}\t{a_repr}\n")


def run_segment(
    points: np.ndarray,
    Y: np.ndarray,
    spec: VarietySpec,
    state: ModelState,
    *,
    trainable: Iterable[str],
    iters: int,
    lr: float,
    fixed_param: PdeParam | None = None,
    convergence_tol: float = 0.0,
    label: str = "train",
    log_stream: IO[str] | None = None,
) -> _SegmentResult:
    """Run one optimization segment over the given trainable groups.

    ``trainable`` is a subset of {"a", "z", "sigma", "noise"}; frozen groups
    keep their exact initial values (their gradients are masked, so the
    optimizer never touches them).  Raises NumericalError if the loss turns
    non-finite, reporting where.
    """
    trainable = tuple(trainable)
    packer = _Packer(state, trainable)
    params = packer.pack_state(state)
    moments = AdamState.zeros(packer.size)
    losses: list[float] = []
    a_values: list[float] = []
    best_loss = np.inf
    best_state = state
    window = 100

    def current_a(st: ModelState):
        if st.a_sq is not None:
            return st.a_sq
        return fixed_param.a_sq if fixed_param is not None else None

    for t in range(1, iters + 1):
        value, grad = nlml_value_and_gradient(spec, points, Y, state, fixed_param)
        if not np.isfinite(value):
            raise NumericalError(
                f"non-finite loss at iteration {t} of segment {label!r} "
                f"(last finite loss: {best_loss if np.isfinite(best_loss) else None})"
            )
        losses.append(value)
        if state.a_sq is not None:
            a_values.append(state.a_sq)
        _emit(log_stream, label, t - 1, value, current_a(state))
        if value < best_loss:
            best_loss = value
            best_state = state.copy()
        if (
            convergence_tol > 0.0
            and t > window
            and (min(losses[:-window]) - best_loss)
            < convergence_tol * (abs(best_loss) + 1.0)
        ):
            break
        g = packer.pack_grad(state, grad) * packer.mask
        params, moments = adam_step(params, g, moments, lr, t)
        state = packer.unpack(params)

    return _SegmentResult(
        best_state=best_state,
        best_loss=float(best_loss),
        final_state=state,
        losses=losses,
        a_values=a_values,
    )


def _finish_report(
    points,
    Y,
    spec,
    fixed_param,
    best_state,
    segments: list[tuple[str, _SegmentResult]],
    restarts: int,
    converged: bool,
    mode: str,
    t0: float,
) -> TrainReport:
    phi = build_phi(
        spec,
        points,
        best_state.z_free,
        PdeParam(best_state.a_sq) if best_state.a_sq is not None else fixed_param,
    )
    post = posterior(phi, Y, best_state)
    losses = np.concatenate([np.asarray(s.losses) for _, s in segments])
    a_all = [np.asarray(s.a_values) for _, s in segments if s.a_values]
    a_trace = np.concatenate(a_all) if a_all else None
    bounds, labels = [], []
    pos = 0
    for lab, s in segments:
        bounds.append(pos)
        labels.append(lab)
        pos += len(s.losses)
    return TrainReport(
        state=best_state,
        posterior=post,
        loss_trace=losses,
        a_sq_trace=a_trace,
        restarts=restarts,
        converged=converged,
        wall_time_s=time.perf_counter() - t0,
        mode=mode,
        segment_bounds=bounds,
        segment_labels=labels,
    )


def train_direct(
    data, spec: VarietySpec, param: PdeParam, cfg: TrainConfig,
    log_stream: IO[str] | None = None,
) -> TrainReport:
    """Fit frequencies and variances with the PDE parameter held fixed."""
    if cfg.mode != "direct":
        raise ConfigurationError(f"cfg.mode is {cfg.mode!r}, expected 'direct'")
    if spec.pde_id != "free" and param is None:
        raise InvalidArgumentError("direct training needs the fixed PdeParam")
    t0 = time.perf_counter()
    points, Y = _points_values(data)
    state0 = _initial_state(spec, cfg, cfg.seed, with_a=False)
    seg = run_segment(
        points, Y, spec, state0,
        trainable=("z", "sigma", "noise"),
        iters=cfg.iters, lr=cfg.lr, fixed_param=param,
        convergence_tol=cfg.convergence_tol,
        label="direct", log_stream=log_stream,
    )
    return _finish_report(
        points, Y, spec, param, seg.best_state,
        [("direct", seg)], restarts=0, converged=True, mode=cfg.mode, t0=t0,
    )


def train_inverse_joint(
    data, spec: VarietySpec, cfg: TrainConfig,
    log_stream: IO[str] | None = None,
) -> TrainReport:
    """Train the squared PDE parameter jointly with all other parameters."""
    if cfg.mode != "inverse_joint":
        raise ConfigurationError(
            f"cfg.mode is {cfg.mode!r}, expected 'inverse_joint'"
        )
    t0 = time.perf_counter()
    points, Y = _points_values(data)
    state0 = _initial_state(spec, cfg, cfg.seed, with_a=True)
    seg = run_segment(
        points, Y, spec, state0,
        trainable=("a", "z", "sigma", "noise"),
        iters=cfg.iters, lr=cfg.lr,
        convergence_tol=cfg.convergence_tol,
        label="joint", log_stream=log_stream,
    )
    return _finish_report(
        points, Y, spec, None, seg.best_state,
        [("joint", seg)], restarts=0, converged=True, mode=cfg.mode, t0=t0,
    )


def _stage1_success(cfg: TrainConfig, seg: _SegmentResult) -> bool:
    if cfg.a_sq_true is not None:
        return abs(seg.best_state.a_sq - cfg.a_sq_true) < cfg.stage1_tol
    # Blind criterion: the parameter has stopped moving and the loss moved.
    a = np.asarray(seg.a_values)
    if a.shape[0] < 51:
        return False
    steps = np.abs(np.diff(a[-51:]))
    settled = bool(np.all(steps < 1e-8))
    start = seg.losses[0]
    improved = (start - min(seg.losses)) >= 0.01 * max(abs(start), 1.0)
    return settled and improved


def train_inverse_staged(
    data, spec: VarietySpec, cfg: TrainConfig,
    log_stream: IO[str] | None = None,
) -> TrainReport:
    """Two-stage inverse training with restarts.

    Stage 1 trains the squared parameter alone from ``a_sq_init`` with all
    other parameters frozen, stepping at ``stage1_lr`` when set and ``lr``
    otherwise; its landing point is the best-loss state of the
    segment.  If the landing fails the stage-1 criterion (see
    :class:`TrainConfig`), the free frequencies are resampled with seed
    ``seed + restart_index`` and stage 1 reruns, up to ``max_restarts``
    times; exhaustion marks the report non-converged and stage 2 proceeds
    from the lowest-loss attempt.  Stage 2 then trains all parameters
    jointly for the remaining ``iters - stage1_iters`` budget from that
    landing.
    """
    if cfg.mode != "inverse_staged":
        raise ConfigurationError(
            f"cfg.mode is {cfg.mode!r}, expected 'inverse_staged'"
        )
    t0 = time.perf_counter()
    points, Y = _points_values(data)
    segments: list[tuple[str, _SegmentResult]] = []
    chosen: _SegmentResult | None = None
    fallback: _SegmentResult | None = None
    restarts = 0
    converged = False
    lr1 = cfg.lr if cfg.stage1_lr is None else cfg.stage1_lr
    for attempt in range(cfg.max_restarts + 1):
        state0 = _initial_state(spec, cfg, cfg.seed + attempt, with_a=True)
        label = f"stage1[{attempt}]"
        seg = run_segment(
            points, Y, spec, state0,
            trainable=("a",),
            iters=cfg.stage1_iters, lr=lr1,
            label=label, log_stream=log_stream,
        )
        segments.append((label, seg))
        restarts = attempt
        if fallback is None or seg.best_loss < fallback.best_loss:
            fallback = seg
        if _stage1_success(cfg, seg):
            chosen = seg
            converged = True
            break
    if chosen is None:
        chosen = fallback
    seg2 = run_segment(
        points, Y, spec, chosen.best_state,
        trainable=("a", "z", "sigma", "noise"),
        iters=cfg.iters - cfg.stage1_iters, lr=cfg.lr,
        convergence_tol=cfg.convergence_tol,
        label="stage2", log_stream=log_stream,
    )
    segments.append(("stage2", seg2))
    return _finish_report(
        points, Y, spec, None, seg2.best_state,
        segments, restarts=restarts, converged=converged, mode=cfg.mode, t0=t0,
    )
