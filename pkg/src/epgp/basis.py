"""Basis matrices of exact PDE solutions built from on-variety frequencies.

Each free frequency point lifts to ``branch_count`` frequency vectors, and
each vector contributes a cosine row and a sine row, so ``m`` free points
yield ``p = 2 * branch_count * m`` rows.  Because every frequency lies on the
characteristic variety, every row is an exact classical solution of the PDE
in the point variables (checked numerically by
:func:`pde_residual_of_basis`); the regression model is a weighted sum of
these rows.

For the hyperbolic and transport operators the lifted temporal coordinate is
a real oscillation frequency and rows are plain trigonometric functions of
the full phase.  For ``heat1d`` the temporal coordinate is a decay exponent,
so rows are ``exp(xi_t * t)`` times a spatial cosine or sine; with ``t >= 0``
(enforced: backward heat evaluation is ill-posed) the decay factor is at most
1 and every entry still lies in [-1, 1].

Row order is fixed: frequency index outermost, branch next, cosine before
sine innermost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .variety import PdeParam, VarietySpec, parametrize_batch

ROW_DTYPE = np.dtype([("freq", "i4"), ("branch", "i4"), ("trig", "U3")])


@dataclass(frozen=True)
class BasisMatrix:
    """A basis evaluation ``phi`` with its row bookkeeping.

    Attributes
    ----------
    phi : ndarray of shape (p, n)
        Row ``r`` holds one trigonometric basis function evaluated at the
        ``n`` points; all entries lie in [-1, 1].
    row_map : structured ndarray of shape (p,)
        Fields ``freq`` (free frequency index), ``branch`` and ``trig``
        ("cos" or "sin") identifying each row.
    pde_id, z_free, a_sq
        Assembly provenance: which variety, free frequencies and parameter
        produced ``phi``.
    """

    phi: np.ndarray
    row_map: np.ndarray
    pde_id: str
    z_free: np.ndarray
    a_sq: float | None

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]


def _check_points(spec: VarietySpec, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != spec.ambient_dim:
        raise InvalidArgumentError(
            f"points must have shape (n, {spec.ambient_dim}), got {pts.shape}"
        )
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("points must be finite")
    if spec.pde_id == "heat1d" and pts.shape[0] and pts[:, -1].min() < 0.0:
        raise InvalidArgumentError("heat1d requires t >= 0 at every point")
    return pts


def build_row_map(m: int, branch_count: int) -> np.ndarray:
    """Row bookkeeping for ``m`` frequencies: (freq, branch, cos|sin)."""
    rows_per_freq = 2 * branch_count
    p = rows_per_freq * m
    out = np.empty(p, dtype=ROW_DTYPE)
    out["freq"] = np.repeat(np.arange(m, dtype=np.int32), rows_per_freq)
    out["branch"] = np.tile(
        np.repeat(np.arange(branch_count, dtype=np.int32), 2), m
    )
    out["trig"] = np.tile(np.array(["cos", "sin"]), branch_count * m)
    return out


def build_phi(
    spec: VarietySpec,
    points: np.ndarray,
    z_free: np.ndarray,
    param: PdeParam | None = None,
) -> BasisMatrix:
    """Evaluate the full basis at a set of points.

    Parameters
    ----------
    spec : VarietySpec
    points : ndarray of shape (n, spec.ambient_dim)
        Evaluation points, coordinate order (x[, y], t).
    z_free : ndarray of shape (m, spec.free_dim)
        Free frequency coordinates.
    param : PdeParam, optional
        Required for every PDE except ``free``.

    Returns
    -------
    BasisMatrix
        ``phi`` has shape ``(2 * branch_count * m, n)``; row ``(j, s, k)``
        maps to flat index ``(j * branch_count + s) * 2 + k`` with ``k = 0``
        for cosine and ``1`` for sine.
    """
    pts = _check_points(spec, points)
    z = np.asarray(z_free, dtype=float)
    if z.ndim != 2 or z.shape[1] != spec.free_dim:
        raise InvalidArgumentError(
            f"z_free must have shape (m, {spec.free_dim}), got {z.shape}"
        )
    xi = parametrize_batch(spec, z, param)  # (b, m, d)
    b, m, _ = xi.shape
    n = pts.shape[0]
    if spec.pde_id == "heat1d":
        # Temporal coordinate is a decay exponent, not a trig frequency.
        args = z @ pts[:, :1].T  # (m, n) spatial phase
        decay = np.exp(np.outer(xi[0, :, -1], pts[:, -1]))  # (m, n)
        phi = np.empty((m, b, 2, n))
        np.cos(args, out=phi[:, 0, 0, :])
        np.sin(args, out=phi[:, 0, 1, :])
        phi[:, 0, 0, :] *= decay
        phi[:, 0, 1, :] *= decay
    else:
        # One dgemm for all phases, then reorder branch-major ->
        # frequency-major.
        args = xi.reshape(b * m, -1) @ pts.T
        args = args.reshape(b, m, n).transpose(1, 0, 2)  # (m, b, n)
        phi = np.empty((m, b, 2, n))
        np.cos(args, out=phi[:, :, 0, :])
        np.sin(args, out=phi[:, :, 1, :])
    phi = phi.reshape(2 * b * m, n)
    a_sq = None if spec.pde_id == "free" or param is None else param.a_sq
    return BasisMatrix(
        phi=phi,
        row_map=build_row_map(m, b),
        pde_id=spec.pde_id,
        z_free=z.copy(),
        a_sq=a_sq,
    )


def pde_residual_of_basis(
    spec: VarietySpec,
    z_free: np.ndarray,
    param: PdeParam | None,
    point: np.ndarray,
    h: float = 1e-3,
) -> np.ndarray:
    """Apply the PDE operator to each basis function at one point.

    Derivatives are second-order central differences with step ``h``, so for
    an exact solution the result is pure truncation error, of size
    ``h**2 / 12`` times fourth derivatives.  Unit-scale frequencies at
    ``h = 1e-3`` stay below 1e-5.  For ``heat1d`` the stencil reaches back to
    ``t - h``, so the point must satisfy ``t >= h``.

    Parameters
    ----------
    z_free : ndarray of shape (m, spec.free_dim) or (spec.free_dim,)
        Free frequencies whose basis functions are differentiated.
    point : ndarray of shape (spec.ambient_dim,)
        Where the operator is evaluated.
    h : float
        Positive finite-difference step.

    Returns
    -------
    ndarray of shape (p,)
        Operator residual per basis row, in :func:`build_phi` row order.
        Identically zero for the ``free`` id, which has no operator.
    """
    if h <= 0:
        raise InvalidArgumentError(f"h must be positive, got {h}")
    z = np.asarray(z_free, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    x0 = np.asarray(point, dtype=float)
    if x0.shape != (spec.ambient_dim,):
        raise InvalidArgumentError(
            f"point must have shape ({spec.ambient_dim},), got {x0.shape}"
        )
    p = 2 * spec.branch_count * z.shape[0]
    if spec.pde_id == "free":
        return np.zeros(p)

    d = spec.ambient_dim
    # Stencil: center plus +/-h along every axis, one basis evaluation total.
    shifts = np.zeros((1 + 2 * d, d))
    for ax in range(d):
        shifts[1 + 2 * ax, ax] = h
        shifts[2 + 2 * ax, ax] = -h
    vals = build_phi(spec, x0[None, :] + shifts, z, param).phi  # (p, 1 + 2d)

    def second(ax: int) -> np.ndarray:
        return (vals[:, 1 + 2 * ax] - 2.0 * vals[:, 0] + vals[:, 2 + 2 * ax]) / (
            h * h
        )

    def first(ax: int) -> np.ndarray:
        return (vals[:, 1 + 2 * ax] - vals[:, 2 + 2 * ax]) / (2.0 * h)

    a = param.a_sq if param is not None else 0.0
    if spec.pde_id == "wave2d":
        return second(2) - a * (second(0) + second(1))
    if spec.pde_id == "wave1d":
        return second(1) - a * second(0)
    if spec.pde_id == "transport1d":
        return first(1) - a * first(0)
    # heat1d
    return first(1) - a * second(0)
