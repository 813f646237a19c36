"""Boolean voxelization of the workspace and conservative set operations.

The grid is the discrete carrier of the collision-free region: the outer
one-voxel shell is always occupied (the workspace walls are obstacles), and
both rasterization and free-space erosion apply a half-space-diagonal margin
so that set containment -- not just voxel-center containment -- holds:

* every point of an analytic obstacle lies inside some occupied voxel;
* every point within ``radius`` of a free voxel center of the eroded grid
  is outside all obstacles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .geometry import Transform, sdf_box, sdf_capsule, sdf_sphere


@dataclass(frozen=True)
class WorldBounds:
    """Axis-aligned workspace box, meters."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=float))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=float))
        if self.min.shape != (3,) or self.max.shape != (3,):
            raise ValueError("bounds must be 3-vectors")
        if not np.all(self.max > self.min):
            raise ValueError("max must be strictly greater than min per axis")

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    def contains(self, pts: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(pts)
        ok = np.all((p >= self.min) & (p <= self.max), axis=-1)
        return ok if np.asarray(pts).ndim > 1 else bool(ok[0])


@dataclass(frozen=True)
class GridDims:
    """Voxel counts per axis; at least 8 so the walls leave an interior."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for n in (self.nx, self.ny, self.nz):
            if int(n) < 8:
                raise ValueError("grid dims must be >= 8 per axis")

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny, self.nz)

    @property
    def total(self) -> int:
        return self.nx * self.ny * self.nz


@dataclass(frozen=True)
class ObstacleShape:
    """Analytic obstacle: 'sphere', 'box', or 'capsule' with a rigid pose.

    Size parameters (meters): sphere -> radius; box -> half_extents (3,);
    capsule -> radius plus half_length along the local z axis.
    """

    kind: str
    pose: Transform = field(default_factory=Transform.identity)
    radius: float = 0.0
    half_extents: Optional[np.ndarray] = None
    half_length: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sphere", "box", "capsule"):
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if self.kind in ("sphere", "capsule") and self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.kind == "capsule" and self.half_length <= 0:
            raise ValueError("capsule half_length must be positive")
        if self.kind == "box":
            he = np.asarray(self.half_extents, dtype=float)
            if he.shape != (3,) or not np.all(he > 0):
                raise ValueError("box half_extents must be 3 positive numbers")
            object.__setattr__(self, "half_extents", he)

    def with_pose(self, pose: Transform) -> "ObstacleShape":
        return ObstacleShape(self.kind, pose, self.radius, self.half_extents, self.half_length)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        """Exact SDF, negative inside the obstacle."""
        if self.kind == "sphere":
            return sdf_sphere(pts, self.pose.pos, self.radius)
        if self.kind == "box":
            return sdf_box(pts, self.pose, self.half_extents)
        axis = self.pose.rot[:, 2] * self.half_length
        return sdf_capsule(pts, self.pose.pos - axis, self.pose.pos + axis, self.radius)

    def aabb(self) -> tuple:
        """World-frame axis-aligned bounding box (lo, hi)."""
        if self.kind == "sphere":
            r = self.radius
            return self.pose.pos - r, self.pose.pos + r
        if self.kind == "box":
            ext = np.abs(self.pose.rot) @ self.half_extents
            return self.pose.pos - ext, self.pose.pos + ext
        axis = self.pose.rot[:, 2] * self.half_length
        lo = np.minimum(self.pose.pos - axis, self.pose.pos + axis) - self.radius
        hi = np.maximum(self.pose.pos - axis, self.pose.pos + axis) + self.radius
        return lo, hi


class OccupancyGrid:
    """Boolean occupancy over a regular grid of voxel centers.

    Immutable after construction; the outer shell is forced occupied.
    """

    def __init__(self, bounds: WorldBounds, dims: GridDims, occupied: np.ndarray,
                 timestamp: float = 0.0):
        occ = np.asarray(occupied, dtype=bool)
        if occ.shape != dims.shape:
            raise ValueError(f"occupancy shape {occ.shape} != dims {dims.shape}")
        occ = occ.copy()
        occ[0, :, :] = occ[-1, :, :] = True
        occ[:, 0, :] = occ[:, -1, :] = True
        occ[:, :, 0] = occ[:, :, -1] = True
        occ.setflags(write=False)
        self.bounds = bounds
        self.dims = dims
        self.occupied = occ
        self.timestamp = float(timestamp)

    @property
    def spacing(self) -> np.ndarray:
        """Voxel edge lengths per axis."""
        return self.bounds.extent / np.array(self.dims.shape, dtype=float)

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.linalg.norm(self.spacing))

    @property
    def empty_interior(self) -> bool:
        """True when no free voxel remains (downstream PDE solve must refuse)."""
        return bool(self.occupied.all())

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.dims.shape[axis]
        h = self.spacing[axis]
        return self.bounds.min[axis] + (np.arange(n) + 0.5) * h

    def voxel_centers(self, idx: np.ndarray) -> np.ndarray:
        """Centers of voxels given integer index rows (N, 3)."""
        return self.bounds.min + (np.asarray(idx, dtype=float) + 0.5) * self.spacing

    def point_to_index(self, pts: np.ndarray) -> np.ndarray:
        """Containing voxel index of each point, clipped to the grid."""
        p = np.atleast_2d(pts)
        idx = np.floor((p - self.bounds.min) / self.spacing).astype(int)
        idx = np.clip(idx, 0, np.array(self.dims.shape) - 1)
        return idx if np.asarray(pts).ndim > 1 else idx[0]

    def free_at(self, pts: np.ndarray) -> np.ndarray:
        """True where the containing voxel of each point is free."""
        idx = np.atleast_2d(self.point_to_index(pts))
        out = ~self.occupied[idx[:, 0], idx[:, 1], idx[:, 2]]
        return out if np.asarray(pts).ndim > 1 else bool(out[0])


def rasterize_scene(shapes: Sequence[ObstacleShape], bounds: WorldBounds,
                    dims: GridDims, timestamp: float = 0.0) -> OccupancyGrid:
    """Conservative voxelization: a voxel is occupied iff it is on the outer
    shell or some shape's SDF at its center is below half the voxel diagonal.

    Shapes are rasterized only inside their padded AABB, so the cost scales
    with obstacle size rather than grid size.
    """
    occ = np.zeros(dims.shape, dtype=bool)
    grid = OccupancyGrid(bounds, dims, occ, timestamp)  # walls only
    occ = grid.occupied.copy()
    spacing = grid.spacing
    margin = grid.half_diagonal
    axes = [grid.axis_centers(a) for a in range(3)]
    shape_arr = np.array(dims.shape)
    for shape in shapes:
        lo, hi = shape.aabb()
        lo_idx = np.floor((lo - margin - bounds.min) / spacing).astype(int)
        hi_idx = np.ceil((hi + margin - bounds.min) / spacing).astype(int)
        lo_idx = np.clip(lo_idx, 0, shape_arr - 1)
        hi_idx = np.clip(hi_idx, 0, shape_arr - 1)
        if np.any(lo_idx > hi_idx):
            continue
        sl = tuple(slice(lo_idx[a], hi_idx[a] + 1) for a in range(3))
        X, Y, Z = np.meshgrid(*(axes[a][sl[a]] for a in range(3)), indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        inside = shape.signed_distance(pts) < margin
        occ[sl] |= inside.reshape(X.shape)
    return OccupancyGrid(bounds, dims, occ, timestamp)


def distance_to_occupied(grid: OccupancyGrid) -> np.ndarray:
    """Exact Euclidean distance from each voxel center to the nearest
    occupied voxel center (0 at occupied voxels)."""
    return ndimage.distance_transform_edt(~grid.occupied, sampling=grid.spacing)


def _ball_offsets(spacing: np.ndarray, r_eff: float) -> np.ndarray:
    """Integer voxel offsets whose physical length is < r_eff."""
    m = np.floor(r_eff / spacing).astype(int)
    rng = [np.arange(-m[a], m[a] + 1) for a in range(3)]
    di, dj, dk = np.meshgrid(*rng, indexing="ij")
    d2 = (di * spacing[0]) ** 2 + (dj * spacing[1]) ** 2 + (dk * spacing[2]) ** 2
    keep = d2 < r_eff * r_eff
    return np.stack([di[keep], dj[keep], dk[keep]], axis=1)


def _occupied_boundary(occ: np.ndarray) -> np.ndarray:
    """Indices of interior occupied voxels with at least one free 6-neighbor."""
    free = ~occ
    inner = occ[1:-1, 1:-1, 1:-1]
    nb = (
        free[:-2, 1:-1, 1:-1] | free[2:, 1:-1, 1:-1]
        | free[1:-1, :-2, 1:-1] | free[1:-1, 2:, 1:-1]
        | free[1:-1, 1:-1, :-2] | free[1:-1, 1:-1, 2:]
    )
    return np.argwhere(inner & nb) + 1


def erode_free_space(grid: OccupancyGrid, radius: float,
                     margin: Optional[float] = None) -> OccupancyGrid:
    """Shrink free space: output voxel occupied iff its center is within
    ``radius + margin`` of some occupied voxel center.

    ``margin`` defaults to half the voxel diagonal, which makes the erosion
    conservative for whole-voxel containment. The implementation dilates the
    occupied-set boundary by the discrete ball of radius ``radius + margin``
    (exactly equivalent to thresholding the distance transform; the nearest
    occupied voxel to any free voxel always lies on the occupied boundary)
    and thickens the workspace walls analytically, so the cost grows with the
    erosion radius rather than with a full distance transform.
    """
    if radius < 0:
        raise ValueError("erosion radius must be non-negative")
    if margin is None:
        margin = grid.half_diagonal
    r_eff = radius + margin
    occ = grid.occupied
    if r_eff <= 0.0:
        return OccupancyGrid(grid.bounds, grid.dims, occ, grid.timestamp)
    nx, ny, nz = grid.dims.shape
    sp = grid.spacing
    out = occ.copy()
    # walls: voxel at axis depth d has its nearest shell center at d * h
    ii = np.minimum(np.arange(nx), np.arange(nx)[::-1]) * sp[0]
    jj = np.minimum(np.arange(ny), np.arange(ny)[::-1]) * sp[1]
    kk = np.minimum(np.arange(nz), np.arange(nz)[::-1]) * sp[2]
    wall = np.minimum.reduce(
        [ii[:, None, None] + np.zeros((1, ny, nz)),
         jj[None, :, None] + np.zeros((nx, 1, nz)),
         kk[None, None, :] + np.zeros((nx, ny, 1))]
    )
    out |= wall < r_eff
    boundary = _occupied_boundary(occ)
    if boundary.size:
        offs = _ball_offsets(sp, r_eff)
        pts = (boundary[:, None, :] + offs[None, :, :]).reshape(-1, 3)
        np.clip(pts, 0, np.array([nx - 1, ny - 1, nz - 1]), out=pts)
        out[pts[:, 0], pts[:, 1], pts[:, 2]] = True
    return OccupancyGrid(grid.bounds, grid.dims, out, grid.timestamp)


_DUMP_MAGIC = b"PSGR"


def dump_grid(grid: OccupancyGrid, path) -> None:
    """Flat binary dump: dims (int32 LE), bounds (float64 LE), then
    bit-packed occupancy, row-major with x fastest."""
    with open(path, "wb") as f:
        f.write(_DUMP_MAGIC)
        f.write(struct.pack("<3i", *grid.dims.shape))
        f.write(struct.pack("<6d", *grid.bounds.min, *grid.bounds.max))
        bits = grid.occupied.transpose(2, 1, 0).ravel()  # x fastest
        f.write(np.packbits(bits, bitorder="little").tobytes())


def load_grid(path) -> OccupancyGrid:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError("not an occupancy dump")
        nx, ny, nz = struct.unpack("<3i", f.read(12))
        vals = struct.unpack("<6d", f.read(48))
        raw = np.frombuffer(f.read(), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[: nx * ny * nz]
    occ = bits.astype(bool).reshape(nz, ny, nx).transpose(2, 1, 0)
    return OccupancyGrid(WorldBounds(np.array(vals[:3]), np.array(vals[3:])),
                         GridDims(nx, ny, nz), occ)
