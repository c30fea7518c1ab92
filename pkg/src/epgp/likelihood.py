"""Marginal likelihood, gradients and posterior in weight space.

The model is ``Y = phi.T @ w + noise`` with ``w ~ N(0, Sigma)``,
``Sigma = diag(sigma_j_sq)`` carrying one variance per basis row, and
observation noise ``N(0, sigma0_sq * I)``.  With

    A = phi @ phi.T + sigma0_sq * Sigma^{-1}

the negative log marginal likelihood is

    NLML = (Y.T Y - Y.T phi.T A^{-1} phi Y) / (2 sigma0_sq)
         + (n - p)/2 * log sigma0_sq + 1/2 * log|Sigma| + 1/2 * log|A|
         + n/2 * log 2 pi,

algebraically equal to the dense Gaussian form
``-log N(Y; 0, phi.T Sigma phi + sigma0_sq I)`` (kept here as
:func:`nlml_oracle_dense`) but costing O(p^2 n) instead of O(n^3).  The
posterior weight mean is ``w_hat = A^{-1} phi Y`` and predictions are
``phi_*.T @ w_hat``.

All solves go through a Cholesky factorization of ``A``; no explicit matrix
inverses.  Variances are carried in log space throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .basis import BasisMatrix, build_phi
from .errors import InvalidArgumentError, NumericalError
from .variety import PdeParam, VarietySpec

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ModelState:
    """Trainable model parameters.

    Attributes
    ----------
    a_sq : float or None
        Squared PDE parameter when it is being inferred; None when the
        parameter is fixed externally (direct problems) or absent (free).
    z_free : ndarray of shape (m, free_dim)
        Free frequency coordinates.
    log_sigma_j_sq : ndarray of shape (p,)
        Log prior variance per basis row, p = 2 * branch_count * m.
    log_sigma0_sq : float
        Log observation noise variance.
    """

    a_sq: float | None
    z_free: np.ndarray
    log_sigma_j_sq: np.ndarray
    log_sigma0_sq: float

    def __post_init__(self):
        z = np.asarray(self.z_free, dtype=float)
        ls = np.asarray(self.log_sigma_j_sq, dtype=float)
        if z.ndim != 2:
            raise InvalidArgumentError(f"z_free must be 2-d, got shape {z.shape}")
        if ls.ndim != 1:
            raise InvalidArgumentError(
                f"log_sigma_j_sq must be 1-d, got shape {ls.shape}"
            )
        if not np.all(np.isfinite(z)):
            raise InvalidArgumentError("z_free entries must be finite")
        if not np.all(np.isfinite(ls)):
            raise InvalidArgumentError("log_sigma_j_sq entries must be finite")
        if not np.isfinite(self.log_sigma0_sq):
            raise InvalidArgumentError("log_sigma0_sq must be finite")
        if self.a_sq is not None:
            a = float(self.a_sq)
            if not np.isfinite(a) or a <= 0.0:
                raise InvalidArgumentError(
                    f"a_sq must be positive and finite, got {a!r}"
                )
            object.__setattr__(self, "a_sq", a)
        object.__setattr__(self, "z_free", z)
        object.__setattr__(self, "log_sigma_j_sq", ls)
        object.__setattr__(self, "log_sigma0_sq", float(self.log_sigma0_sq))

    def copy(self) -> "ModelState":
        return replace(
            self, z_free=self.z_free.copy(), log_sigma_j_sq=self.log_sigma_j_sq.copy()
        )


@dataclass(frozen=True)
class NlmlGradient:
    """Gradient of the NLML, matching ModelState's trainable fields.

    ``a_sq`` is the derivative with respect to the squared parameter itself
    (not its log); it is None when the parameter is fixed or absent.
    Variance components are derivatives with respect to the logs.
    """

    a_sq: float | None
    z_free: np.ndarray
    log_sigma_j_sq: np.ndarray
    log_sigma0_sq: float


@dataclass(frozen=True)
class Posterior:
    """Posterior weight mean with the factorization that produced it.

    ``chol_A`` is the lower Cholesky factor of ``A`` evaluated at
    ``state_snapshot``; ``weights`` solves ``A w = phi Y``.  ``a_sq_used``
    records the squared parameter the basis was built with, which equals
    ``state_snapshot.a_sq`` when that is set.
    """

    chol_A: np.ndarray
    weights: np.ndarray
    state_snapshot: ModelState
    a_sq_used: float | None


def _phi_array(phi: BasisMatrix | np.ndarray) -> np.ndarray:
    arr = phi.phi if isinstance(phi, BasisMatrix) else np.asarray(phi, dtype=float)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"phi must be 2-d, got shape {arr.shape}")
    return arr


def _check_y(Y: np.ndarray, n: int) -> np.ndarray:
    y = np.asarray(Y, dtype=float)
    if y.shape != (n,):
        raise InvalidArgumentError(f"Y must have shape ({n},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("Y entries must be finite")
    return y


def _chol_lower(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising NumericalError on breakdown."""
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NumericalError(
            f"Cholesky breakdown: leading minor {info} not positive definite",
            minor_index=int(info),
        )
    if info < 0:
        raise NumericalError(f"Cholesky failed: illegal argument {-info}")
    return L


def assemble_A(phi: BasisMatrix | np.ndarray, state: ModelState) -> np.ndarray:
    """Form ``A = phi @ phi.T + sigma0_sq * Sigma^{-1}`` (exactly symmetric).

    The Gram part uses a symmetric rank-k update and is mirrored, so the
    result satisfies ``A == A.T`` bitwise.
    """
    arr = _phi_array(phi)
    p = arr.shape[0]
    ls = state.log_sigma_j_sq
    if ls.shape[0] != p:
        raise InvalidArgumentError(
            f"log_sigma_j_sq has length {ls.shape[0]}, expected p = {p}"
        )
    gram = scipy.linalg.blas.dsyrk(1.0, arr, lower=1)
    A = np.tril(gram)
    A += np.tril(gram, -1).T
    diag = np.exp(state.log_sigma0_sq - ls)
    A[np.diag_indices_from(A)] += diag
    return A


def _core(phi_arr: np.ndarray, Y: np.ndarray, state: ModelState) -> dict:
    """Shared NLML plumbing: factorization, weights and the value."""
    p, n = phi_arr.shape
    A = assemble_A(phi_arr, state)
    L = _chol_lower(A)
    b = phi_arr @ Y
    alpha = scipy.linalg.cho_solve((L, True), b)
    s0 = np.exp(state.log_sigma0_sq)
    quad = float(Y @ Y - b @ alpha)
    half_logdet_A = float(np.sum(np.log(np.diag(L))))
    value = (
        quad / (2.0 * s0)
        + 0.5 * (n - p) * state.log_sigma0_sq
        + 0.5 * float(np.sum(state.log_sigma_j_sq))
        + half_logdet_A
        + 0.5 * n * LOG_2PI
    )
    return {
        "A": A,
        "L": L,
        "alpha": alpha,
        "s0": s0,
        "quad": quad,
        "value": float(value),
    }


def nlml(phi: BasisMatrix | np.ndarray, Y: np.ndarray, state: ModelState) -> float:
    """Negative log marginal likelihood via the weight-space identity."""
    arr = _phi_array(phi)
    y = _check_y(Y, arr.shape[1])
    return _core(arr, y, state)["value"]


def nlml_oracle_dense(
    phi: BasisMatrix | np.ndarray, Y: np.ndarray, state: ModelState
) -> float:
    """NLML through the dense n-by-n covariance; the reference route.

    Forms ``K = phi.T Sigma phi + sigma0_sq I`` explicitly, so it costs
    O(n^3) and is meant for n up to a few hundred.  Agreement with
    :func:`nlml` to high relative accuracy is the correctness check for the
    weight-space algebra.
    """
    arr = _phi_array(phi)
    y = _check_y(Y, arr.shape[1])
    n = arr.shape[1]
    sigma_sq = np.exp(state.log_sigma_j_sq)
    if sigma_sq.shape[0] != arr.shape[0]:
        raise InvalidArgumentError(
            f"log_sigma_j_sq has length {sigma_sq.shape[0]}, expected {arr.shape[0]}"
        )
    K = arr.T @ (sigma_sq[:, None] * arr)
    K[np.diag_indices_from(K)] += np.exp(state.log_sigma0_sq)
    L = _chol_lower(K)
    alpha = scipy.linalg.cho_solve((L, True), y)
    return float(
        0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * LOG_2PI
    )


def _effective_param(
    spec: VarietySpec, state: ModelState, fixed_param: PdeParam | None
) -> PdeParam | None:
    if spec.pde_id == "free":
        return None
    if state.a_sq is not None:
        return PdeParam(state.a_sq)
    if fixed_param is None:
        raise InvalidArgumentError(
            "state.a_sq is unset and no fixed PdeParam was provided"
        )
    return fixed_param


def nlml_value_and_gradient(
    spec: VarietySpec,
    points: np.ndarray,
    Y: np.ndarray,
    state: ModelState,
    fixed_param: PdeParam | None = None,
) -> tuple[float, NlmlGradient]:
    """NLML and its gradient in one basis build and one factorization.

    The gradient covers ``z_free``, ``log_sigma_j_sq`` and
    ``log_sigma0_sq`` always, and ``a_sq`` exactly when ``state.a_sq`` is
    set (for fixed-parameter problems pass the value via ``fixed_param``
    and the ``a_sq`` component is omitted).  At the cone vertex
    ``z_free[j] = 0`` the undefined radial direction contributes zero by
    convention.

    Returns
    -------
    (float, NlmlGradient)
    """
    param = _effective_param(spec, state, fixed_param)
    bm = build_phi(spec, points, state.z_free, param)
    phi_arr = bm.phi
    p, n = phi_arr.shape
    if state.log_sigma_j_sq.shape[0] != p:
        raise InvalidArgumentError(
            f"log_sigma_j_sq has length {state.log_sigma_j_sq.shape[0]}, "
            f"expected p = {p}"
        )
    pts = np.asarray(points, dtype=float)
    y = _check_y(Y, n)
    core = _core(phi_arr, y, state)
    L, alpha, s0 = core["L"], core["alpha"], core["s0"]
    sigma_sq = np.exp(state.log_sigma_j_sq)

    # diag(A^{-1}) from the inverse Cholesky factor.
    Linv, info = lapack.dtrtri(L, lower=1)
    if info != 0:
        raise NumericalError(f"triangular inversion failed (info={info})")
    diag_Ainv = np.einsum("ij,ij->j", Linv, Linv)

    g_ls0 = (
        -core["quad"] / (2.0 * s0)
        + 0.5 * float(np.sum(alpha * alpha / sigma_sq))
        + 0.5 * (n - p)
        + 0.5 * s0 * float(np.sum(diag_Ainv / sigma_sq))
    )
    g_ls = 0.5 - (alpha * alpha + s0 * diag_Ainv) / (2.0 * sigma_sq)

    # Frequency and parameter gradients via the adjoint
    # W = A^{-1} phi - alpha r.T / sigma0_sq, paired with d(phi)/d(theta).
    G = scipy.linalg.cho_solve((L, True), phi_arr)
    r = y - phi_arr.T @ alpha
    W = G
    W -= np.outer(alpha, r / s0)

    m = state.z_free.shape[0]
    bcount = spec.branch_count
    W4 = W.reshape(m, bcount, 2, n)
    P4 = phi_arr.reshape(m, bcount, 2, n)
    # Sensitivity of NLML to each row's trigonometric phase.
    U = W4[:, :, 1, :] * P4[:, :, 0, :]
    U -= W4[:, :, 0, :] * P4[:, :, 1, :]

    z = state.z_free
    a = param.a_sq if param is not None else None
    if spec.pde_id == "free":
        red = U.reshape(m * bcount, n) @ pts  # (m*b, d)
        g_z = red.reshape(m, bcount, spec.free_dim).sum(axis=1)
        g_a = None
    elif spec.pde_id == "heat1d":
        # Phase carries only the spatial coordinate; the temporal factor
        # exp(xi_t t) has amplitude sensitivity sum_rows W.P weighted by t.
        S_x = U[:, 0, :] @ pts[:, 0]
        V = W4[:, 0, 0, :] * P4[:, 0, 0, :] + W4[:, 0, 1, :] * P4[:, 0, 1, :]
        S_amp = V @ pts[:, -1]
        g_z = (S_x - 2.0 * a * z[:, 0] * S_amp)[:, None]
        g_a = -float(np.sum(z[:, 0] ** 2 * S_amp))
    else:
        coords = np.column_stack([pts[:, : spec.free_dim], pts[:, -1]])
        red = U.reshape(m * bcount, n) @ coords
        red = red.reshape(m, bcount, spec.free_dim + 1)
        S_xy = red[:, :, : spec.free_dim]
        S_t = red[:, :, -1]
        if spec.pde_id in ("wave2d", "wave1d"):
            omega = np.sqrt(a * np.sum(z * z, axis=1))
            Dt = S_t[:, 0] - S_t[:, 1]
            ratio = np.zeros_like(z)
            np.divide(a * z, omega[:, None], out=ratio, where=omega[:, None] > 0)
            g_z = S_xy.sum(axis=1) + ratio * Dt[:, None]
            g_a = float(np.sum(omega * Dt) / (2.0 * a))
        else:  # transport1d: xi_t = a z
            g_z = S_xy[:, 0, :] + a * S_t[:, 0, None]
            g_a = float(np.sum(z[:, 0] * S_t[:, 0]))

    grad = NlmlGradient(
        a_sq=g_a if state.a_sq is not None else None,
        z_free=g_z,
        log_sigma_j_sq=g_ls,
        log_sigma0_sq=float(g_ls0),
    )
    return core["value"], grad


def nlml_gradient(
    spec: VarietySpec,
    points: np.ndarray,
    Y: np.ndarray,
    state: ModelState,
    fixed_param: PdeParam | None = None,
) -> NlmlGradient:
    """Gradient of the NLML; see :func:`nlml_value_and_gradient`."""
    return nlml_value_and_gradient(spec, points, Y, state, fixed_param)[1]


def posterior(
    phi: BasisMatrix | np.ndarray, Y: np.ndarray, state: ModelState
) -> Posterior:
    """Posterior weight mean ``w_hat = A^{-1} phi Y`` via Cholesky solves."""
    arr = _phi_array(phi)
    y = _check_y(Y, arr.shape[1])
    core = _core(arr, y, state)
    a_used = phi.a_sq if isinstance(phi, BasisMatrix) else state.a_sq
    return Posterior(
        chol_A=core["L"],
        weights=core["alpha"],
        state_snapshot=state.copy(),
        a_sq_used=a_used,
    )


def predict(
    post: Posterior, test_points: np.ndarray, spec: VarietySpec
) -> np.ndarray:
    """Posterior mean at new points: rebuild the basis there, apply weights."""
    a = post.a_sq_used
    param = None if (spec.pde_id == "free" or a is None) else PdeParam(a)
    bm = build_phi(spec, test_points, post.state_snapshot.z_free, param)
    return bm.phi.T @ post.weights
