"""Characteristic varieties of constant-coefficient PDEs.

A PDE operator has a symbol, a polynomial in the frequency vector; its zero
set (the characteristic variety) is the set of frequencies whose plane waves
solve the PDE.  This module maps free frequency coordinates onto that zero
set, one lifted vector per branch.  For the wave equation in two space
dimensions the variety is the double cone

    xi_t**2 = a_sq * (xi_x**2 + xi_y**2),

so each spatial frequency (z1, z2) lifts to two vectors, one per sign of
xi_t.  First-order PDEs (transport, diffusion) have a single branch, and the
unconstrained "free" id applies no lift at all.

Coordinate order is (x, t) for one space dimension and (x, y, t) for two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

PDE_IDS = ("wave2d", "wave1d", "transport1d", "heat1d", "free")

# PDEs with a second-order time symbol have two branches (sign of xi_t).
_BRANCHES = {"wave2d": 2, "wave1d": 2, "transport1d": 1, "heat1d": 1, "free": 1}
_FREE_DIMS = {"wave2d": 2, "wave1d": 1, "transport1d": 1, "heat1d": 1}


@dataclass(frozen=True)
class VarietySpec:
    """Identity and dimensions of one PDE's characteristic variety.

    Parameters
    ----------
    pde_id : str
        One of ``PDE_IDS``.
    ambient_dim : int
        Dimension of the full frequency space (space plus time axes).
    free_dim : int
        Number of free coordinates parametrizing the variety.
    branch_count : int
        Sheets of the variety over a free point (2 for wave equations).
    multiplier_degree : int
        Degree of the polynomial weight attached to each exponential.
        Only degree 0 (plain exponentials) is supported.
    """

    pde_id: str
    ambient_dim: int
    free_dim: int
    branch_count: int
    multiplier_degree: int = 0

    def __post_init__(self):
        if self.pde_id not in PDE_IDS:
            raise InvalidArgumentError(
                f"unknown pde_id {self.pde_id!r}; expected one of {PDE_IDS}"
            )
        if self.multiplier_degree != 0:
            raise InvalidArgumentError(
                "only multiplier_degree 0 is supported, got "
                f"{self.multiplier_degree}"
            )
        if self.free_dim < 1:
            raise InvalidArgumentError(f"free_dim must be >= 1, got {self.free_dim}")
        expected_ambient = self.free_dim + (0 if self.pde_id == "free" else 1)
        if self.ambient_dim != expected_ambient:
            raise InvalidArgumentError(
                f"ambient_dim {self.ambient_dim} inconsistent with free_dim "
                f"{self.free_dim} for {self.pde_id}"
            )
        if self.pde_id != "free" and self.free_dim != _FREE_DIMS[self.pde_id]:
            raise InvalidArgumentError(
                f"{self.pde_id} has {_FREE_DIMS[self.pde_id]} free coordinate(s), "
                f"got free_dim {self.free_dim}"
            )
        if self.branch_count != _BRANCHES[self.pde_id]:
            raise InvalidArgumentError(
                f"{self.pde_id} has {_BRANCHES[self.pde_id]} branch(es), "
                f"got branch_count {self.branch_count}"
            )


@dataclass(frozen=True)
class PdeParam:
    """Scalar PDE parameter.

    ``a_sq`` is the squared wave speed for the wave equations, the diffusivity
    for ``heat1d`` and the transport speed for ``transport1d``.  It is unused
    for the ``free`` id.  Must be a positive finite real.
    """

    a_sq: float

    def __post_init__(self):
        a = float(self.a_sq)
        if not np.isfinite(a) or a <= 0.0:
            raise InvalidArgumentError(f"a_sq must be positive and finite, got {a!r}")
        object.__setattr__(self, "a_sq", a)


def make_spec(pde_id: str, ambient_dim: int | None = None) -> VarietySpec:
    """Build the :class:`VarietySpec` for a registered PDE.

    ``ambient_dim`` is only meaningful for ``pde_id == "free"`` where the
    frequency space is unconstrained (default 3); for the registered PDEs the
    dimensions are fixed by the operator.
    """
    if pde_id == "free":
        d = 3 if ambient_dim is None else int(ambient_dim)
        return VarietySpec("free", d, d, 1)
    if pde_id not in PDE_IDS:
        raise InvalidArgumentError(
            f"unknown pde_id {pde_id!r}; expected one of {PDE_IDS}"
        )
    free_dim = _FREE_DIMS[pde_id]
    if ambient_dim is not None and ambient_dim != free_dim + 1:
        raise InvalidArgumentError(
            f"{pde_id} has ambient_dim {free_dim + 1}, got {ambient_dim}"
        )
    return VarietySpec(pde_id, free_dim + 1, free_dim, _BRANCHES[pde_id])


def sample_free_frequencies(spec: VarietySpec, m: int, seed: int) -> np.ndarray:
    """Draw ``m`` free frequency points, i.i.d. standard normal entries.

    Deterministic for a fixed ``(spec.free_dim, m, seed)``.

    Returns
    -------
    ndarray of shape (m, spec.free_dim)
    """
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, spec.free_dim))


def _require_param(spec: VarietySpec, param: PdeParam | None) -> float:
    if spec.pde_id == "free":
        return 0.0
    if param is None:
        raise InvalidArgumentError(f"{spec.pde_id} requires a PdeParam")
    return param.a_sq


def parametrize_batch(
    spec: VarietySpec, z_free: np.ndarray, param: PdeParam | None = None
) -> np.ndarray:
    """Lift a batch of free frequency points onto the variety.

    Parameters
    ----------
    z_free : ndarray of shape (m, spec.free_dim)
        Free coordinates.  The cone vertex (all zeros) is allowed and lifts
        to duplicated zero vectors.
    param : PdeParam, optional
        Required for every PDE except ``free``.

    Returns
    -------
    ndarray of shape (spec.branch_count, m, spec.ambient_dim)
        On-variety frequency vectors; the positive-``xi_t`` branch comes
        first for the wave equations.
    """
    z = np.asarray(z_free, dtype=float)
    if z.ndim != 2 or z.shape[1] != spec.free_dim:
        raise InvalidArgumentError(
            f"z_free must have shape (m, {spec.free_dim}), got {z.shape}"
        )
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("z_free entries must be finite")
    a = _require_param(spec, param)
    m = z.shape[0]
    out = np.empty((spec.branch_count, m, spec.ambient_dim))
    if spec.pde_id == "free":
        out[0] = z
        return out
    out[:, :, : spec.free_dim] = z[None, :, :]
    if spec.pde_id in ("wave2d", "wave1d"):
        omega = np.sqrt(a * np.sum(z * z, axis=1))
        out[0, :, -1] = omega
        out[1, :, -1] = -omega
    elif spec.pde_id == "transport1d":
        out[0, :, -1] = a * z[:, 0]
    else:  # heat1d: xi_t is the decay rate -a*z**2
        out[0, :, -1] = -a * z[:, 0] ** 2
    return out


def parametrize(
    spec: VarietySpec, z_free: np.ndarray, param: PdeParam | None = None
) -> np.ndarray:
    """Lift one free frequency point; see :func:`parametrize_batch`.

    Returns an array of shape ``(branch_count, ambient_dim)``.
    """
    z = np.atleast_1d(np.asarray(z_free, dtype=float))
    if z.shape != (spec.free_dim,):
        raise InvalidArgumentError(
            f"z_free must have shape ({spec.free_dim},), got {z.shape}"
        )
    return parametrize_batch(spec, z[None, :], param)[:, 0, :]


def symbol_residual(
    spec: VarietySpec, xi: np.ndarray, param: PdeParam | None = None
) -> float:
    """Evaluate the PDE symbol at a frequency vector.

    Zero (to rounding) exactly on the characteristic variety.  For
    ``wave2d`` this is ``xi_t**2 - a_sq*(xi_x**2 + xi_y**2)``; the ``free``
    id puts no constraint on frequencies, so its residual is identically 0.
    """
    v = np.asarray(xi, dtype=float)
    if v.shape != (spec.ambient_dim,):
        raise InvalidArgumentError(
            f"xi must have shape ({spec.ambient_dim},), got {v.shape}"
        )
    a = _require_param(spec, param)
    if spec.pde_id == "wave2d":
        return float(v[2] ** 2 - a * (v[0] ** 2 + v[1] ** 2))
    if spec.pde_id == "wave1d":
        return float(v[1] ** 2 - a * v[0] ** 2)
    if spec.pde_id == "transport1d":
        return float(v[1] - a * v[0])
    if spec.pde_id == "heat1d":
        return float(v[1] + a * v[0] ** 2)
    return 0.0
