"""Safety field synthesis: Dirichlet problem for Poisson's equation on the
buffered free space, plus continuous field queries.

The field solves ``lap(h) = -forcing_c`` at free voxels with ``h = 0`` at
occupied voxels, using red-black successive over-relaxation. With a strictly
negative forcing the converged field is positive throughout the free interior
and vanishes on obstacles, so its 0-superlevel set is the buffered free
region. Value queries interpolate node values trilinearly; gradient queries
interpolate per-node finite-difference gradients (one-sided next to occupied
voxels, where central differences would smear the Dirichlet zeros).
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .voxel_grid import GridDims, OccupancyGrid, WorldBounds

_USE_NUMBA = os.environ.get("POISSON_SAFETY_NO_NUMBA", "") == ""
if _USE_NUMBA:
    try:
        from numba import njit, prange
    except Exception:  # pragma: no cover - numba present in normal installs
        _USE_NUMBA = False

AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


class EmptyInteriorError(ValueError):
    """Raised when a grid has no free voxels to solve on."""


class OutOfDomainError(ValueError):
    """Raised when a query point lies outside the field bounds."""


@dataclass(frozen=True)
class SolverSettings:
    """Red-black SOR parameters.

    ``residual_tol`` bounds the max-norm defect of the 7-point Laplacian
    against the forcing; ``max_iters_warm`` caps warm-started re-solves.
    """

    omega: float = 1.9
    residual_tol: float = 1e-4
    max_iters: int = 5000
    max_iters_warm: int = 500
    forcing_c: float = 6.0

    def __post_init__(self):
        if not (1.0 <= self.omega < 2.0):
            raise ValueError("omega must lie in [1, 2)")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if self.forcing_c <= 0:
            raise ValueError("forcing_c must be positive")


if _USE_NUMBA:

    @njit(parallel=True, cache=True)
    def _sor_color(u, occ, c, omega, ih2x, ih2y, ih2z, color):  # pragma: no cover
        nx, ny, nz = u.shape
        denom = 2.0 * (ih2x + ih2y + ih2z)
        for i in prange(1, nx - 1):
            for j in range(1, ny - 1):
                k0 = 1 + ((i + j + 1 + color) % 2)
                for k in range(k0, nz - 1, 2):
                    if not occ[i, j, k]:
                        s = (u[i - 1, j, k] + u[i + 1, j, k]) * ih2x \
                            + (u[i, j - 1, k] + u[i, j + 1, k]) * ih2y \
                            + (u[i, j, k - 1] + u[i, j, k + 1]) * ih2z
                        u[i, j, k] = (1.0 - omega) * u[i, j, k] + omega * (s + c) / denom

    @njit(parallel=True, cache=True)
    def _gradient_kernel(u, occ, hx, hy, hz, out):  # pragma: no cover
        nx, ny, nz = u.shape
        for i in prange(nx):
            for j in range(ny):
                for k in range(nz):
                    uc = u[i, j, k]
                    f_ok = i + 1 < nx and not occ[i + 1, j, k]
                    b_ok = i - 1 >= 0 and not occ[i - 1, j, k]
                    if f_ok and b_ok:
                        out[0, i, j, k] = (u[i + 1, j, k] - u[i - 1, j, k]) / (2 * hx)
                    elif f_ok:
                        out[0, i, j, k] = (u[i + 1, j, k] - uc) / hx
                    elif b_ok:
                        out[0, i, j, k] = (uc - u[i - 1, j, k]) / hx
                    else:
                        out[0, i, j, k] = 0.0
                    f_ok = j + 1 < ny and not occ[i, j + 1, k]
                    b_ok = j - 1 >= 0 and not occ[i, j - 1, k]
                    if f_ok and b_ok:
                        out[1, i, j, k] = (u[i, j + 1, k] - u[i, j - 1, k]) / (2 * hy)
                    elif f_ok:
                        out[1, i, j, k] = (u[i, j + 1, k] - uc) / hy
                    elif b_ok:
                        out[1, i, j, k] = (uc - u[i, j - 1, k]) / hy
                    else:
                        out[1, i, j, k] = 0.0
                    f_ok = k + 1 < nz and not occ[i, j, k + 1]
                    b_ok = k - 1 >= 0 and not occ[i, j, k - 1]
                    if f_ok and b_ok:
                        out[2, i, j, k] = (u[i, j, k + 1] - u[i, j, k - 1]) / (2 * hz)
                    elif f_ok:
                        out[2, i, j, k] = (u[i, j, k + 1] - uc) / hz
                    elif b_ok:
                        out[2, i, j, k] = (uc - u[i, j, k - 1]) / hz
                    else:
                        out[2, i, j, k] = 0.0

    @njit(parallel=True, cache=True)
    def _max_defect(u, occ, c, ih2x, ih2y, ih2z):  # pragma: no cover
        nx, ny, nz = u.shape
        denom = 2.0 * (ih2x + ih2y + ih2z)
        worst = 0.0
        for i in prange(1, nx - 1):
            local = 0.0
            for j in range(1, ny - 1):
                for k in range(1, nz - 1):
                    if not occ[i, j, k]:
                        lap = (u[i - 1, j, k] + u[i + 1, j, k]) * ih2x \
                            + (u[i, j - 1, k] + u[i, j + 1, k]) * ih2y \
                            + (u[i, j, k - 1] + u[i, j, k + 1]) * ih2z \
                            - denom * u[i, j, k]
                        d = abs(lap + c)
                        if d > local:
                            local = d
            worst = max(worst, local)
        return worst


def _neighbor_sum(u: np.ndarray, ih2: np.ndarray) -> np.ndarray:
    s = np.zeros_like(u)
    s[1:, :, :] += u[:-1, :, :] * ih2[0]
    s[:-1, :, :] += u[1:, :, :] * ih2[0]
    s[:, 1:, :] += u[:, :-1, :] * ih2[1]
    s[:, :-1, :] += u[:, 1:, :] * ih2[1]
    s[:, :, 1:] += u[:, :, :-1] * ih2[2]
    s[:, :, :-1] += u[:, :, 1:] * ih2[2]
    return s


def _sor_color_np(u, occ, c, omega, ih2, color_masks):
    denom = 2.0 * ih2.sum()
    mask = color_masks
    s = _neighbor_sum(u, ih2)
    gs = (s + c) / denom
    u[mask] = (1.0 - omega) * u[mask] + omega * gs[mask]


def _max_defect_np(u, occ, c, ih2):
    denom = 2.0 * ih2.sum()
    lap = _neighbor_sum(u, ih2) - denom * u
    free = ~occ
    if not free.any():
        return 0.0
    return float(np.abs(lap[free] + c).max())


def laplacian_defect(values: np.ndarray, occupied: np.ndarray, spacing,
                     forcing_c: float) -> float:
    """Max-norm defect of the 7-point Laplacian against the forcing, over
    free voxels. Matches the solver's convergence criterion exactly."""
    ih2 = 1.0 / np.asarray(spacing, dtype=float) ** 2
    if _USE_NUMBA:
        return float(_max_defect(values, occupied, forcing_c, ih2[0], ih2[1], ih2[2]))
    return _max_defect_np(values, occupied, forcing_c, ih2)


class ScalarField:
    """Converged (or flagged) field values on the grid nodes, with cached
    per-node gradients for interpolation. Immutable once constructed."""

    def __init__(self, bounds: WorldBounds, dims: GridDims, values: np.ndarray,
                 occupied: np.ndarray, timestamp: float = 0.0,
                 iterations_used: int = 0, residual: float = 0.0,
                 converged: bool = True):
        vals = np.asarray(values, dtype=float)
        if vals.shape != dims.shape:
            raise ValueError("values shape mismatch")
        vals = vals.copy()
        vals.setflags(write=False)
        occ = np.asarray(occupied, dtype=bool).copy()
        occ.setflags(write=False)
        self.bounds = bounds
        self.dims = dims
        self.values = vals
        self.occupied = occ
        self.timestamp = float(timestamp)
        self.iterations_used = int(iterations_used)
        self.residual = float(residual)
        self.converged = bool(converged)
        self._grad: Optional[np.ndarray] = None

    @property
    def spacing(self) -> np.ndarray:
        return self.bounds.extent / np.array(self.dims.shape, dtype=float)

    def _gradient_nodes(self) -> np.ndarray:
        """(3, nx, ny, nz) per-node gradient: central where both axis
        neighbors are free, one-sided toward the free side otherwise."""
        if self._grad is not None:
            return self._grad
        u, occ, sp = self.values, self.occupied, self.spacing
        grad = np.zeros((3,) + u.shape)
        if _USE_NUMBA:
            _gradient_kernel(u, np.ascontiguousarray(occ), sp[0], sp[1], sp[2], grad)
            grad.setflags(write=False)
            self._grad = grad
            return grad
        free = ~occ
        for a in range(3):
            h = sp[a]
            fwd_free = np.zeros_like(free)
            bwd_free = np.zeros_like(free)
            sl_all = [slice(None)] * 3
            sl_lo, sl_hi = sl_all.copy(), sl_all.copy()
            sl_lo[a], sl_hi[a] = slice(None, -1), slice(1, None)
            fwd_free[tuple(sl_lo)] = free[tuple(sl_hi)]
            bwd_free[tuple(sl_hi)] = free[tuple(sl_lo)]
            u_fwd = np.zeros_like(u)
            u_bwd = np.zeros_like(u)
            u_fwd[tuple(sl_lo)] = u[tuple(sl_hi)]
            u_bwd[tuple(sl_hi)] = u[tuple(sl_lo)]
            central = (u_fwd - u_bwd) / (2 * h)
            one_fwd = (u_fwd - u) / h
            one_bwd = (u - u_bwd) / h
            g = np.where(fwd_free & bwd_free, central,
                         np.where(fwd_free, one_fwd, np.where(bwd_free, one_bwd, 0.0)))
            grad[a] = g
        grad.setflags(write=False)
        self._grad = grad
        return grad

    def _locate(self, pts: np.ndarray):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.all((p >= self.bounds.min) & (p <= self.bounds.max), axis=1)
        if not inside.all():
            bad = p[~inside][0]
            raise OutOfDomainError(f"point {bad.tolist()} outside field bounds")
        sp = self.spacing
        u = (p - self.bounds.min) / sp - 0.5
        base = np.floor(u).astype(int)
        shape = np.array(self.dims.shape)
        base = np.clip(base, 0, shape - 2)
        frac = np.clip(u - base, 0.0, 1.0)
        return base, frac

    def _trilinear(self, arr: np.ndarray, base: np.ndarray, frac: np.ndarray) -> np.ndarray:
        i, j, k = base[:, 0], base[:, 1], base[:, 2]
        fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
        c000 = arr[..., i, j, k]
        c100 = arr[..., i + 1, j, k]
        c010 = arr[..., i, j + 1, k]
        c110 = arr[..., i + 1, j + 1, k]
        c001 = arr[..., i, j, k + 1]
        c101 = arr[..., i + 1, j, k + 1]
        c011 = arr[..., i, j + 1, k + 1]
        c111 = arr[..., i + 1, j + 1, k + 1]
        c00 = c000 * (1 - fx) + c100 * fx
        c10 = c010 * (1 - fx) + c110 * fx
        c01 = c001 * (1 - fx) + c101 * fx
        c11 = c011 * (1 - fx) + c111 * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        return c0 * (1 - fz) + c1 * fz


def sample_value(field: ScalarField, pts: np.ndarray):
    """Trilinear field value at one point (3,) or a batch (N, 3)."""
    base, frac = field._locate(pts)
    out = field._trilinear(field.values, base, frac)
    return out if np.asarray(pts).ndim > 1 else float(out[0])


def sample_gradient(field: ScalarField, pts: np.ndarray):
    """Trilinear interpolation of per-node gradients; (3,) or (N, 3)."""
    base, frac = field._locate(pts)
    g = field._trilinear(field._gradient_nodes(), base, frac)
    return g.T if np.asarray(pts).ndim > 1 else g[:, 0]


@dataclass(frozen=True)
class FieldPair:
    """Latest solved field plus the previous distinct one for the backward
    time difference. ``previous`` may be absent (static start)."""

    current: ScalarField
    previous: Optional[ScalarField] = None

    def __post_init__(self):
        if self.previous is not None:
            if self.previous.dims.shape != self.current.dims.shape:
                raise ValueError("field pair must share grid geometry")
            if self.current.timestamp <= self.previous.timestamp:
                raise ValueError("current field must be newer than previous")

    @property
    def dt(self) -> float:
        if self.previous is None:
            return 0.0
        return self.current.timestamp - self.previous.timestamp


def time_derivative(pair: FieldPair, pts: np.ndarray):
    """Backward-difference temporal derivative of the field at points."""
    single = np.asarray(pts).ndim == 1
    if pair.previous is None:
        n = 1 if single else len(np.atleast_2d(pts))
        out = np.zeros(n)
        return float(out[0]) if single else out
    dt = pair.dt
    if dt <= 0:
        raise ValueError("field pair dt must be positive")
    cur = np.atleast_1d(sample_value(pair.current, pts))
    prev = np.atleast_1d(sample_value(pair.previous, pts))
    out = (cur - prev) / dt
    return float(out[0]) if single else out


def solve_poisson(buffered: OccupancyGrid, settings: SolverSettings,
                  warm_start: Optional[ScalarField] = None) -> ScalarField:
    """Red-black SOR solve of the safety field on the buffered grid.

    Initialized from ``warm_start`` where a voxel is free in both grids, zero
    elsewhere. Returns a non-converged field (flagged) if the iteration cap
    is hit first.
    """
    if buffered.empty_interior:
        raise EmptyInteriorError("no free voxels to solve on")
    occ = buffered.occupied
    u = np.zeros(buffered.dims.shape)
    cap = settings.max_iters
    if warm_start is not None:
        if warm_start.dims.shape != buffered.dims.shape:
            raise ValueError("warm start grid geometry mismatch")
        both_free = (~occ) & (~warm_start.occupied)
        u[both_free] = warm_start.values[both_free]
        cap = settings.max_iters_warm
    sp = buffered.spacing
    ih2 = 1.0 / sp**2
    c, omega, tol = settings.forcing_c, settings.omega, settings.residual_tol

    # the defect check costs about a third of a sweep, so while far from
    # tolerance it runs every other sweep
    iters = 0
    if _USE_NUMBA:
        occ_c = np.ascontiguousarray(occ)
        res = float(_max_defect(u, occ_c, c, ih2[0], ih2[1], ih2[2]))
        while res > tol and iters < cap:
            iters += 1
            _sor_color(u, occ_c, c, omega, ih2[0], ih2[1], ih2[2], 0)
            _sor_color(u, occ_c, c, omega, ih2[0], ih2[1], ih2[2], 1)
            if res > 100.0 * tol and iters % 2 == 1 and iters < cap:
                continue
            res = float(_max_defect(u, occ_c, c, ih2[0], ih2[1], ih2[2]))
        if res > tol:  # cap exit may leave the check one sweep stale
            res = float(_max_defect(u, occ_c, c, ih2[0], ih2[1], ih2[2]))
    else:
        idx = np.indices(buffered.dims.shape).sum(axis=0)
        free = ~occ
        masks = (free & (idx % 2 == 0), free & (idx % 2 == 1))
        res = _max_defect_np(u, occ, c, ih2)
        while res > tol and iters < cap:
            iters += 1
            _sor_color_np(u, occ, c, omega, ih2, masks[0])
            _sor_color_np(u, occ, c, omega, ih2, masks[1])
            if res > 100.0 * tol and iters % 2 == 1 and iters < cap:
                continue
            res = _max_defect_np(u, occ, c, ih2)
        if res > tol:
            res = _max_defect_np(u, occ, c, ih2)
    return ScalarField(buffered.bounds, buffered.dims, u, occ,
                       timestamp=buffered.timestamp, iterations_used=iters,
                       residual=res, converged=res <= tol)


_FIELD_MAGIC = b"PSFD"


def dump_field(field: ScalarField, path) -> None:
    """Binary dump: dims int32 LE, bounds float64 LE, values float64 LE
    (row-major, x fastest)."""
    with open(path, "wb") as f:
        f.write(_FIELD_MAGIC)
        f.write(struct.pack("<3i", *field.dims.shape))
        f.write(struct.pack("<6d", *field.bounds.min, *field.bounds.max))
        f.write(field.values.transpose(2, 1, 0).astype("<f8").tobytes())


def load_field(path) -> ScalarField:
    with open(path, "rb") as f:
        if f.read(4) != _FIELD_MAGIC:
            raise ValueError("not a field dump")
        nx, ny, nz = struct.unpack("<3i", f.read(12))
        vals = struct.unpack("<6d", f.read(48))
        data = np.frombuffer(f.read(), dtype="<f8")
    values = data.reshape(nz, ny, nx).transpose(2, 1, 0)
    bounds = WorldBounds(np.array(vals[:3]), np.array(vals[3:]))
    return ScalarField(bounds, GridDims(nx, ny, nz), values,
                       occupied=values == 0.0)


def slice_values(field: ScalarField, axis, offset: float):
    """Axis-aligned plane of node values nearest to ``offset`` (meters).

    Returns (plane_index, 2D array) with the slice axes in grid order.
    """
    a = AXES[axis]
    n = field.dims.shape[a]
    h = field.spacing[a]
    idx = int(np.clip(round((offset - field.bounds.min[a]) / h - 0.5), 0, n - 1))
    sl = [slice(None)] * 3
    sl[a] = idx
    return idx, field.values[tuple(sl)]


def write_slice_csv(field: ScalarField, axis, offset: float, path) -> None:
    _, plane = slice_values(field, axis, offset)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for row in plane:
            w.writerow([f"{v:.9g}" for v in row])
