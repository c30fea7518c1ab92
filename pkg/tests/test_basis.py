import numpy as np
import pytest
from numpy.testing import assert_allclose

from epgp import (
    InvalidArgumentError,
    PdeParam,
    build_phi,
    make_spec,
    pde_residual_of_basis,
    sample_free_frequencies,
)
from epgp.basis import build_row_map

SQRT3 = np.sqrt(3.0)


def test_phi_shape_and_row_count():
    spec = make_spec("wave2d")
    z = sample_free_frequencies(spec, 5, 0)
    pts = np.random.default_rng(1).uniform(-2, 2, (7, 3))
    bm = build_phi(spec, pts, z, PdeParam(3.0))
    assert bm.phi.shape == (20, 7)
    assert bm.p == 20
    assert bm.n == 7
    tr = make_spec("transport1d")
    bm1 = build_phi(tr, np.array([[0.1, 0.2]]), np.array([[1.0]]), PdeParam(1.0))
    assert bm1.p == 2


def test_phi_at_origin():
    spec = make_spec("wave2d")
    z = sample_free_frequencies(spec, 4, 2)
    bm = build_phi(spec, np.zeros((1, 3)), z, PdeParam(2.0))
    cos_rows = bm.row_map["trig"] == "cos"
    assert_allclose(bm.phi[cos_rows, 0], 1.0, rtol=0, atol=0)
    assert_allclose(bm.phi[~cos_rows, 0], 0.0, rtol=0, atol=0)


def test_phi_pi_spatial_point():
    # At t = 0 the branch lift is invisible: both branches give cos(pi) = -1.
    spec = make_spec("wave2d")
    bm = build_phi(
        spec, np.array([[np.pi, 0.0, 0.0]]), np.array([[1.0, 0.0]]), PdeParam(3.0)
    )
    assert_allclose(bm.phi[[0, 2], 0], -1.0, rtol=1e-15)
    assert_allclose(bm.phi[[1, 3], 0], 0.0, rtol=0, atol=1e-15)


def test_phi_pure_time_point_branch_symmetry():
    spec = make_spec("wave2d")
    bm = build_phi(
        spec, np.array([[0.0, 0.0, 1.0]]), np.array([[1.0, 0.0]]), PdeParam(3.0)
    )
    col = bm.phi[:, 0]
    assert_allclose(col[0], np.cos(SQRT3), rtol=1e-15)
    assert_allclose(col[1], np.sin(SQRT3), rtol=1e-15)
    assert_allclose(col[2], np.cos(SQRT3), rtol=1e-15)
    assert_allclose(col[3], -np.sin(SQRT3), rtol=1e-15)


def test_row_map_layout():
    rm = build_row_map(2, 2)
    assert rm.shape == (8,)
    assert list(rm["freq"]) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert list(rm["branch"]) == [0, 0, 1, 1, 0, 0, 1, 1]
    assert list(rm["trig"]) == ["cos", "sin"] * 4


def test_entries_bounded():
    rng = np.random.default_rng(5)
    for pde_id in ("wave2d", "wave1d", "transport1d", "heat1d", "free"):
        spec = make_spec(pde_id)
        z = sample_free_frequencies(spec, 6, 3) * 2.0
        pts = rng.uniform(-5, 5, (40, spec.ambient_dim))
        if pde_id == "heat1d":
            pts[:, -1] = np.abs(pts[:, -1])
        param = None if pde_id == "free" else PdeParam(1.7)
        bm = build_phi(spec, pts, z, param)
        assert np.all(bm.phi >= -1.0) and np.all(bm.phi <= 1.0)


def test_heat_rows_decay_in_time():
    spec = make_spec("heat1d")
    z = np.array([[1.5]])
    param = PdeParam(0.8)
    pts = np.array([[0.3, 0.0], [0.3, 1.0], [0.3, 2.0]])
    bm = build_phi(spec, pts, z, param)
    rate = np.exp(-0.8 * 1.5**2)
    expected = np.cos(0.45) * rate ** pts[:, 1]
    assert_allclose(bm.phi[0], expected, rtol=1e-14)


def test_heat_rejects_negative_time():
    spec = make_spec("heat1d")
    with pytest.raises(InvalidArgumentError):
        build_phi(spec, np.array([[0.0, -0.5]]), np.array([[1.0]]), PdeParam(1.0))


def test_point_permutation_equivariance():
    spec = make_spec("wave2d")
    rng = np.random.default_rng(8)
    z = sample_free_frequencies(spec, 3, 1)
    pts = rng.uniform(-4, 4, (11, 3))
    perm = rng.permutation(11)
    a = build_phi(spec, pts, z, PdeParam(2.3)).phi
    b = build_phi(spec, pts[perm], z, PdeParam(2.3)).phi
    assert np.array_equal(a[:, perm], b)


def test_provenance_recorded():
    spec = make_spec("wave2d")
    z = np.array([[0.5, -0.25]])
    bm = build_phi(spec, np.zeros((2, 3)), z, PdeParam(3.5))
    assert bm.pde_id == "wave2d"
    assert bm.a_sq == 3.5
    assert np.array_equal(bm.z_free, z)
    bm_free = build_phi(make_spec("free"), np.zeros((2, 3)), np.ones((1, 3)))
    assert bm_free.a_sq is None


def test_shape_validation():
    spec = make_spec("wave2d")
    with pytest.raises(InvalidArgumentError):
        build_phi(spec, np.zeros((3, 2)), np.ones((1, 2)), PdeParam(1.0))
    with pytest.raises(InvalidArgumentError):
        build_phi(spec, np.zeros((3, 3)), np.ones((1, 3)), PdeParam(1.0))
    with pytest.raises(InvalidArgumentError):
        build_phi(spec, np.full((3, 3), np.inf), np.ones((1, 2)), PdeParam(1.0))


def test_residual_wave2d_sample_point():
    res = pde_residual_of_basis(
        make_spec("wave2d"),
        np.array([1.0, 1.0]),
        PdeParam(3.0),
        np.array([0.3, -0.2, 0.5]),
        h=1e-3,
    )
    assert res.shape == (4,)
    assert np.max(np.abs(res)) <= 1e-5


def test_residual_zero_frequency_exact():
    res = pde_residual_of_basis(
        make_spec("wave2d"),
        np.zeros((1, 2)),
        PdeParam(2.0),
        np.array([1.0, 2.0, 3.0]),
    )
    assert_allclose(res, 0.0, rtol=0, atol=1e-10)


def test_residual_free_is_zero():
    res = pde_residual_of_basis(
        make_spec("free"), np.ones((3, 3)), None, np.array([0.1, 0.2, 0.3])
    )
    assert np.array_equal(res, np.zeros(6))


def test_residual_property_random_unit_scale():
    # Truncation for the second-order stencil is (h^2/12) times fourth
    # derivatives, so unit-scale frequencies keep it well under 1e-5.
    rng = np.random.default_rng(17)
    for pde_id in ("wave2d", "wave1d", "transport1d", "heat1d"):
        spec = make_spec(pde_id)
        for _ in range(25):
            z = rng.uniform(-1.2, 1.2, spec.free_dim)
            a = rng.uniform(0.3, 3.0)
            pt = rng.uniform(-3.0, 3.0, spec.ambient_dim)
            if pde_id == "heat1d":
                pt[-1] = rng.uniform(0.1, 3.0)
            res = pde_residual_of_basis(spec, z, PdeParam(a), pt, h=1e-3)
            assert np.max(np.abs(res)) <= 1e-5, (pde_id, z, a, pt)


def test_residual_h_validation():
    with pytest.raises(InvalidArgumentError):
        pde_residual_of_basis(
            make_spec("wave2d"),
            np.array([1.0, 0.0]),
            PdeParam(1.0),
            np.zeros(3),
            h=0.0,
        )
