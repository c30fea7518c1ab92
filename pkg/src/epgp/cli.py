"""Command-line interface.

Subcommands: ``generate`` (synthetic datasets), ``train`` (fit a model and
write a checkpoint), ``predict`` (evaluate a checkpoint at points),
``benchmark`` (run a reference table) and ``error-grid`` (prediction error
on a space slice).

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 training did not converge.  Set EPGP_THREADS to cap BLAS threads.
"""

from __future__ import annotations

import argparse
import sys

from . import _threads  # noqa: F401  (cap threads before numpy BLAS work)
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    NumericalError,
)
from .experiments import (
    checkpoint_from_report,
    config_hash,
    export_error_grid,
    generate_dataset,
    load_checkpoint,
    load_dataset,
    predict_checkpoint,
    run_benchmark,
    save_checkpoint,
    save_dataset,
    SOLUTIONS,
)
from .training import TrainConfig, train_direct, train_inverse_joint, train_inverse_staged
from .variety import PdeParam, make_spec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

_CLI_MODES = {
    "direct": "direct",
    "inverse": "inverse_joint",
    "inverse-staged": "inverse_staged",
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="epgp",
        description="Sparse spectral Gaussian processes on PDE characteristic varieties.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic dataset")
    g.add_argument("--solution", required=True, choices=sorted(SOLUTIONS))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="fit a model and write a checkpoint")
    t.add_argument("--mode", required=True, choices=sorted(_CLI_MODES))
    t.add_argument("--pde", default="wave2d", choices=["wave2d"])
    t.add_argument("--data", required=True)
    t.add_argument("--m", type=int, required=True)
    t.add_argument("--iters", type=int, default=3000)
    t.add_argument("--lr", type=float, default=1e-2)
    t.add_argument("--a2-init", type=float, default=None)
    t.add_argument("--a2-true", type=float, default=None,
                   help="known squared parameter (required for direct mode; "
                        "enables the benchmark stage-1 criterion for staged)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--checkpoint", required=True)
    t.add_argument("--stage1-iters", type=int, default=400)
    t.add_argument("--stage1-lr", type=float, default=None,
                   help="step size for the scalar stage-1 search "
                        "(default: share --lr)")
    t.add_argument("--stage1-tol", type=float, default=1e-6)
    t.add_argument("--max-restarts", type=int, default=5)
    t.add_argument("--sigma0-init", type=float, default=1e-2)

    p = sub.add_parser("predict", help="evaluate a checkpoint at points")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--points", required=True,
                   help="CSV with header x,y,t (a trailing Y column is ignored)")
    p.add_argument("--out", required=True)

    b = sub.add_parser("benchmark", help="run a reference experiment table")
    b.add_argument("--table", required=True, choices=["T1", "T2", "T3"])
    b.add_argument("--scale", type=float, default=1.0,
                   help="shrink every row's n and m by this factor")
    b.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("error-grid", help="prediction error on an x,y grid")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--solution", required=True, choices=sorted(SOLUTIONS))
    e.add_argument("--t", type=float, required=True)
    e.add_argument("--res", type=int, required=True)
    e.add_argument("--out", required=True)
    return ap


def _cmd_generate(args) -> int:
    ds = generate_dataset(args.solution, args.n, args.noise, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n} points to {args.out}")
    return EXIT_OK


def _load_points(path: str):
    import numpy as np

    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigurationError(f"cannot read points {path!r}: {exc}") from exc
    if not lines:
        raise ConfigurationError(f"points file {path!r} is empty")
    header = lines[0].replace(" ", "")
    if header not in ("x,y,t", "x,y,t,Y"):
        raise ConfigurationError(
            f"points file {path!r} must have header 'x,y,t' or 'x,y,t,Y'"
        )
    try:
        data = np.array(
            [[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float
        )
    except ValueError as exc:
        raise ConfigurationError(f"bad number in {path!r}: {exc}") from exc
    ncols = 3 if header == "x,y,t" else 4
    if data.ndim != 2 or data.shape[1] != ncols:
        raise ConfigurationError(f"points file {path!r} must have {ncols} columns")
    return data[:, :3]


def _cmd_train(args) -> int:
    mode = _CLI_MODES[args.mode]
    ds = load_dataset(args.data)
    spec = make_spec(args.pde)
    cfg_kwargs = dict(
        mode=mode,
        m=args.m,
        iters=args.iters,
        lr=args.lr,
        seed=args.seed,
        stage1_iters=args.stage1_iters,
        stage1_lr=args.stage1_lr,
        stage1_tol=args.stage1_tol,
        max_restarts=args.max_restarts,
        sigma0_sq_init=args.sigma0_init,
    )
    if mode == "direct":
        if args.a2_true is None:
            raise ConfigurationError("direct mode requires --a2-true (the known value)")
    else:
        if args.a2_init is None:
            raise ConfigurationError(f"mode {args.mode!r} requires --a2-init")
        cfg_kwargs["a_sq_init"] = args.a2_init
        cfg_kwargs["a_sq_true"] = args.a2_true
    cfg = TrainConfig(**cfg_kwargs)
    log_path = args.checkpoint + ".log"
    with open(log_path, "w") as log_stream:
        if mode == "direct":
            report = train_direct(ds, spec, PdeParam(args.a2_true), cfg, log_stream)
        elif mode == "inverse_joint":
            report = train_inverse_joint(ds, spec, cfg, log_stream)
        else:
            report = train_inverse_staged(ds, spec, cfg, log_stream)
    ckpt = checkpoint_from_report(
        report,
        pde_id=args.pde,
        ambient_dim=spec.ambient_dim,
        solution_id=ds.solution_id,
        config_hash=config_hash(cfg, {"data": args.data, "pde": args.pde}),
    )
    save_checkpoint(ckpt, args.checkpoint)
    a_msg = f" a_sq={report.state.a_sq!r}" if report.state.a_sq is not None else ""
    print(
        f"trained {mode} in {report.wall_time_s:.1f}s, "
        f"best loss {report.best_loss:.6g},{a_msg} -> {args.checkpoint}",
        file=sys.stderr,
    )
    if not report.converged:
        print("warning: staged training exhausted restarts", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    pts = _load_points(args.points)
    pred = predict_checkpoint(ckpt, pts)
    lines = ["x,y,t,pred"]
    for row, v in zip(pts, pred):
        lines.append(",".join(repr(float(u)) for u in (*row, v)))
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(pred)} predictions to {args.out}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    rows = run_benchmark(args.table, args.out, scale=args.scale)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows) - len(failed)}/{len(rows)} rows ok -> {args.out}")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def _cmd_error_grid(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    export_error_grid(ckpt, args.solution, args.t, args.res, args.out)
    print(f"wrote {args.res * args.res} grid errors to {args.out}")
    return EXIT_OK


_HANDLERS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "benchmark": _cmd_benchmark,
    "error-grid": _cmd_error_grid,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (InvalidArgumentError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
