"""End-to-end targets: held-out accuracy, parameter recovery, oracle
agreement, operator residuals, and command-line determinism.

Each test is one capability target with its tolerance stated inline.  The
training runs are the slowest tests in the suite (the staged high-frequency
recovery dominates); run them alone with

    pytest tests/test_acceptance.py -v
"""

import subprocess
import sys

import numpy as np
from dataclasses import replace

from epgp import (
    ModelState,
    PdeParam,
    build_phi,
    export_error_grid,
    make_spec,
    nlml_value_and_gradient,
    run_case,
)
from epgp.experiments import checkpoint_from_report


def test_direct_training_reaches_reference_accuracy():
    # Known wave speed, 100 points, 10 frequency pairs: held-out RMSE
    # must reach 1e-5 within a two-minute budget.
    out = run_case(
        "lowfreq_cos", "direct", 100, 10, seed=5, iters=60000, lr=1e-3,
    )
    assert out["rmse"] <= 1e-5
    assert out["report"].wall_time_s <= 120.0


def test_joint_inverse_recovers_wave_speed():
    # 1000 points, 100 frequency pairs, squared speed started at 1:
    # recovery within +/-0.005 of 3 and held-out RMSE at the 1e-3 level,
    # inside a thirty-minute budget.
    out = run_case(
        "lowfreq_cos", "inverse_joint", 1000, 100,
        seed=7, iters=8000, lr=1e-2, a_sq_init=1.0,
    )
    assert 2.995 <= out["a_sq"] <= 3.005
    assert out["rmse"] <= 1e-3
    assert out["report"].wall_time_s <= 1800.0
    # A converged fit keeps the whole mid-time error slice small, not
    # just the sampled points.
    ckpt = checkpoint_from_report(out["report"], "wave2d", 3, "lowfreq_cos")
    grid = export_error_grid(ckpt, "lowfreq_cos", t_slice=0.5, grid_resolution=40)
    assert np.max(np.abs(grid[:, 2])) <= 2e-3


def test_joint_inverse_handles_polynomial_solution():
    # Quadratic characteristic solution: recovered squared speed within
    # [1.48, 1.52] and held-out RMSE at the 1e-2 level.
    out = run_case(
        "poly_sq", "inverse_joint", 1000, 100,
        seed=7, iters=6000, lr=1e-2, a_sq_init=1.0,
    )
    assert 1.48 <= out["a_sq"] <= 1.52
    assert out["rmse"] <= 1e-2


def test_staged_inverse_recovers_high_frequency_solution():
    # Squared speed started at 2 with the two-stage scheme; the scalar
    # stage uses a small step while the joint stage uses a step large
    # enough to move frequencies between ripples of the loss surface.
    # The joint stage is chaotic in its starting point, so the data seed
    # is pinned separately from the initialization seed.
    # Recovery within +/-0.01 of 3 and held-out RMSE at the 1e-3 level.
    out = run_case(
        "highfreq_cos", "inverse_staged", 1200, 120,
        seed=53, data_seed=7, iters=30000, lr=0.3,
        a_sq_init=2.0, a_sq_true=3.0,
        stage1_iters=300, stage1_lr=1e-2, stage1_tol=1.0,
    )
    assert 2.99 <= out["a_sq"] <= 3.01
    assert out["rmse"] <= 1e-3


def test_noisy_data_keeps_accuracy_and_recovery():
    # Observation noise of std 1e-3: both modes stay at the 1e-3 error
    # level (bound 5e-3) and the inverse run still recovers the speed.
    direct = run_case(
        "lowfreq_cos", "direct", 1000, 100,
        noise_std=1e-3, seed=7, iters=5000, lr=1e-2,
    )
    assert direct["rmse"] <= 5e-3
    inverse = run_case(
        "lowfreq_cos", "inverse_joint", 1000, 100,
        noise_std=1e-3, seed=7, iters=5000, lr=1e-2, a_sq_init=1.0,
    )
    assert inverse["rmse"] <= 5e-3
    assert 2.99 <= inverse["a_sq"] <= 3.01


def _random_instance(rng, pde_id):
    spec = make_spec(pde_id)
    n = int(rng.integers(20, 201))
    m = int(rng.integers(2, 64 // (2 * spec.branch_count) + 1))
    pts = rng.uniform(-3.0, 3.0, (n, spec.ambient_dim))
    if pde_id == "heat1d":
        pts[:, -1] = rng.uniform(0.0, 3.0, n)
    state = ModelState(
        a_sq=None if pde_id == "free" else float(rng.uniform(0.4, 4.0)),
        z_free=rng.standard_normal((m, spec.free_dim)),
        log_sigma_j_sq=rng.uniform(-2.0, 1.0, 2 * spec.branch_count * m),
        log_sigma0_sq=float(rng.uniform(-3.0, 0.0)),
    )
    Y = rng.standard_normal(n)
    return spec, pts, Y, state


def _dense_gaussian_nlml(phi, Y, state):
    # Marginal negative log density of Y ~ N(0, phi^T diag(s) phi + s0 I),
    # assembled explicitly in the n x n observation space.
    w_var = np.exp(state.log_sigma_j_sq)
    noise = np.exp(state.log_sigma0_sq)
    K = (phi.T * w_var) @ phi + noise * np.eye(Y.shape[0])
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    alpha = np.linalg.solve(K, Y)
    return 0.5 * (float(Y @ alpha) + logdet + Y.shape[0] * np.log(2.0 * np.pi))


def test_weight_space_likelihood_matches_dense_gaussian():
    # 50 random instances across the built-in operator families: the
    # weight-space value agrees with the dense Gaussian log density to
    # 1e-9 relative.
    rng = np.random.default_rng(1234)
    pdes = ("wave2d", "transport1d", "heat1d", "free")
    for k in range(50):
        spec, pts, Y, state = _random_instance(rng, pdes[k % 4])
        param = None if state.a_sq is None else PdeParam(state.a_sq)
        bm = build_phi(spec, pts, state.z_free, param)
        val, _ = nlml_value_and_gradient(spec, pts, Y, state)
        ref = _dense_gaussian_nlml(bm.phi, Y, state)
        assert abs(val - ref) <= 1e-9 * abs(ref), (k, val, ref)


def _central_fd(f, state, field, index, h):
    if field == "a_sq":
        hi = replace(state, a_sq=state.a_sq + h)
        lo = replace(state, a_sq=state.a_sq - h)
    elif field == "log_sigma0_sq":
        hi = replace(state, log_sigma0_sq=state.log_sigma0_sq + h)
        lo = replace(state, log_sigma0_sq=state.log_sigma0_sq - h)
    elif field == "z_free":
        zp, zm = state.z_free.copy(), state.z_free.copy()
        zp[index] += h
        zm[index] -= h
        hi, lo = replace(state, z_free=zp), replace(state, z_free=zm)
    else:
        lp, lm = state.log_sigma_j_sq.copy(), state.log_sigma_j_sq.copy()
        lp[index] += h
        lm[index] -= h
        hi, lo = replace(state, log_sigma_j_sq=lp), replace(state, log_sigma_j_sq=lm)
    return (f(hi) - f(lo)) / (2.0 * h)


def test_analytic_gradients_match_central_differences():
    # Every gradient component on 20 random instances agrees with a
    # central difference to 1e-4 relative (1e-6 absolute floor for
    # components near zero).
    rng = np.random.default_rng(77)
    pdes = ("wave2d", "transport1d", "heat1d", "free")
    for k in range(20):
        pde = pdes[k % 4]
        spec = make_spec(pde)
        n, m = 40, 3
        pts = rng.uniform(-3.0, 3.0, (n, spec.ambient_dim))
        if pde == "heat1d":
            pts[:, -1] = rng.uniform(0.0, 3.0, n)
        state = ModelState(
            a_sq=None if pde == "free" else float(rng.uniform(0.4, 4.0)),
            z_free=rng.standard_normal((m, spec.free_dim)),
            log_sigma_j_sq=rng.uniform(-2.0, 1.0, 2 * spec.branch_count * m),
            log_sigma0_sq=float(rng.uniform(-3.0, 0.0)),
        )
        Y = rng.standard_normal(n)

        def f(s):
            return nlml_value_and_gradient(spec, pts, Y, s)[0]

        _, g = nlml_value_and_gradient(spec, pts, Y, state)
        checks = []
        if state.a_sq is not None:
            checks.append(
                (_central_fd(f, state, "a_sq", None, state.a_sq * 1e-5), g.a_sq)
            )
        checks.append(
            (_central_fd(f, state, "log_sigma0_sq", None, 1e-6), g.log_sigma0_sq)
        )
        for j in range(m):
            for d in range(spec.free_dim):
                checks.append(
                    (_central_fd(f, state, "z_free", (j, d), 1e-6), g.z_free[j, d])
                )
        for j in range(state.log_sigma_j_sq.shape[0]):
            checks.append(
                (_central_fd(f, state, "log_sigma_j_sq", j, 1e-6), g.log_sigma_j_sq[j])
            )
        for fd, an in checks:
            assert abs(an - fd) <= 1e-4 * max(abs(fd), abs(an)) + 1e-6, (pde, fd, an)


def test_basis_functions_satisfy_wave_equation():
    # 100 random basis functions: the second-difference wave residual
    # u_tt - a^2 (u_xx + u_yy) at a random interior point stays below
    # 1e-5 with step 1e-3.  Frequencies stay in a moderate box so the
    # h^2 truncation term sits well under the bound.
    rng = np.random.default_rng(11)
    spec = make_spec("wave2d")
    h = 1e-3
    checked = 0
    for _ in range(25):
        z = rng.uniform(-1.2, 1.2, (1, 2))
        a_sq = float(rng.uniform(0.5, 3.0))
        x, y, t = rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(1.0, 11.0)
        stencil = np.array(
            [
                [x, y, t],
                [x + h, y, t], [x - h, y, t],
                [x, y + h, t], [x, y - h, t],
                [x, y, t + h], [x, y, t - h],
            ]
        )
        phi = build_phi(spec, stencil, z, PdeParam(a_sq)).phi
        u0 = phi[:, 0]
        u_xx = (phi[:, 1] + phi[:, 2] - 2.0 * u0) / h**2
        u_yy = (phi[:, 3] + phi[:, 4] - 2.0 * u0) / h**2
        u_tt = (phi[:, 5] + phi[:, 6] - 2.0 * u0) / h**2
        resid = u_tt - a_sq * (u_xx + u_yy)
        assert np.all(np.abs(resid) <= 1e-5), (z, a_sq, resid)
        checked += phi.shape[0]
    assert checked == 100


def _run_cli(args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "epgp", *args],
        cwd=cwd, capture_output=True, text=True,
    )
    assert proc.returncode == 0, (args, proc.stderr)


def test_cli_runs_are_deterministic(tmp_path):
    # Identical flags and seed produce byte-identical output files for
    # every subcommand that writes one.
    def generate(tag):
        _run_cli(
            ["generate", "--solution", "lowfreq_cos", "--n", "60",
             "--noise", "1e-3", "--seed", "3", "--out", f"d{tag}.csv"],
            tmp_path,
        )

    def train(tag):
        _run_cli(
            ["train", "--mode", "direct", "--data", "d1.csv", "--m", "4",
             "--iters", "40", "--lr", "1e-2", "--a2-true", "3.0",
             "--seed", "1", "--checkpoint", f"c{tag}.ckpt"],
            tmp_path,
        )

    def predict(tag):
        _run_cli(
            ["predict", "--checkpoint", "c1.ckpt", "--points", "d1.csv",
             "--out", f"p{tag}.csv"],
            tmp_path,
        )

    def grid(tag):
        _run_cli(
            ["error-grid", "--checkpoint", "c1.ckpt", "--solution",
             "lowfreq_cos", "--t", "6.0", "--res", "5", "--out", f"g{tag}.csv"],
            tmp_path,
        )

    for run in (generate, train, predict, grid):
        run(1)
        run(2)
    pairs = [
        ("d1.csv", "d2.csv"),
        ("d1.csv.meta.json", "d2.csv.meta.json"),
        ("c1.ckpt", "c2.ckpt"),
        ("c1.ckpt.log", "c2.ckpt.log"),
        ("p1.csv", "p2.csv"),
        ("g1.csv", "g2.csv"),
    ]
    for a, b in pairs:
        assert (tmp_path / a).read_bytes() == (tmp_path / b).read_bytes(), (a, b)
