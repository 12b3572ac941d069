"""Gaussian-splat world map: PLY I/O, spatial index, collision, occupancy.

Each splat is a 3-D Gaussian treated as a hard ellipsoid at sigma_gate
standard deviations for collision purposes, with every axis scale
inflated by the robot radius (sphere envelope). The occupancy grid marks
a voxel occupied exactly when a collision check at its center collides.

PLY interchange follows the common 3DGS export layout: binary little
endian, vertex properties x,y,z, scale_0..2, rot_0..3 (quaternion
w,x,y,z), opacity, f_dc_0..2, with exp applied to raw scales and sigmoid
to raw opacity on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fusion import sigmoid
from .rotations import quaternion_to_matrix
from .zsr import BadMagic, IoFailure, TruncatedFile

DEFAULT_OPACITY_FLOOR = 0.05
DEFAULT_ROBOT_RADIUS = 0.5
DEFAULT_SIGMA_GATE = 3.0
DEFAULT_WARN_MARGIN = 0.25

ZSOG_MAGIC = b"ZSOG"
_ZSOG_HEADER = struct.Struct("<4s3ff3I")

_PLY_PROPS = (
    "x", "y", "z",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
    "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
)

_PLY_DTYPES = {
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
}


class MalformedHeader(ValueError):
    """PLY header missing, unparseable, or not binary little endian."""


class MissingProperty(ValueError):
    """PLY vertex element lacks a required property."""


class TruncatedBody(ValueError):
    """PLY body shorter than the header-declared vertex block."""


class EmptyMap(ValueError):
    """Occupancy requested for a map with no splats."""


class AlertLevel(Enum):
    NONE = "NONE"
    WARN = "WARN"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class GaussianSplat:
    """One 3-D Gaussian: post-activation scale/opacity, unit quaternion."""

    mean: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    orientation: np.ndarray = field(repr=False)
    opacity: float = 1.0
    color: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        quat = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        color = self.color
        color = np.zeros(3) if color is None else np.asarray(color, dtype=np.float64).reshape(3)
        if (scale <= 0).any():
            raise ValueError(f"scale components must be positive, got {scale}")
        if abs(np.linalg.norm(quat) - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {np.linalg.norm(quat)} != 1")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity {self.opacity} outside [0, 1]")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "orientation", quat)
        object.__setattr__(self, "color", color)

    def rotation_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self.orientation)


@dataclass(frozen=True)
class CollisionReport:
    colliding: bool
    min_mahalanobis: float
    nearest_splat: int | None
    alert_level: AlertLevel

    def __post_init__(self) -> None:
        if self.colliding and self.nearest_splat is None:
            raise ValueError("colliding report must name a nearest splat")


@dataclass(frozen=True)
class SplatMap:
    """Immutable splat collection with a uniform hash over means.

    The index accelerates radius queries; correctness never depends on
    cell_size because the query scans every cell overlapping the query
    ball. Stacked field arrays are precomputed for collision math.
    """

    splats: tuple[GaussianSplat, ...]
    cell_size: float

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError(f"cell_size {self.cell_size} must be positive")
        n = len(self.splats)
        means = np.array([s.mean for s in self.splats]).reshape(n, 3)
        scales = np.array([s.scale for s in self.splats]).reshape(n, 3)
        rots = np.array([s.rotation_matrix() for s in self.splats]).reshape(n, 3, 3)
        cells: dict[tuple[int, int, int], list[int]] = {}
        for i in range(n):
            cells.setdefault(self._cell_of(means[i]), []).append(i)
        object.__setattr__(self, "_means", means)
        object.__setattr__(self, "_scales", scales)
        object.__setattr__(self, "_rotations", rots)
        object.__setattr__(self, "_cells", {k: tuple(v) for k, v in cells.items()})

    @classmethod
    def from_splats(
        cls,
        splats: list[GaussianSplat] | tuple[GaussianSplat, ...],
        cell_size: float | None = None,
    ) -> "SplatMap":
        splats = tuple(splats)
        if cell_size is None:
            top = max((float(s.scale.max()) for s in splats), default=1.0)
            cell_size = 2.0 * (top + DEFAULT_ROBOT_RADIUS)
        return cls(splats=splats, cell_size=cell_size)

    def _cell_of(self, p: np.ndarray) -> tuple[int, int, int]:
        c = np.floor(np.asarray(p, dtype=np.float64) / self.cell_size).astype(int)
        return int(c[0]), int(c[1]), int(c[2])

    def __len__(self) -> int:
        return len(self.splats)

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def scales(self) -> np.ndarray:
        return self._scales

    @property
    def rotations(self) -> np.ndarray:
        return self._rotations

    @property
    def max_scale(self) -> float:
        return float(self._scales.max()) if len(self.splats) else 0.0

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.splats:
            return np.zeros(3), np.zeros(3)
        return self._means.min(axis=0), self._means.max(axis=0)


def load_ply(path, opacity_floor: float = DEFAULT_OPACITY_FLOOR) -> SplatMap:
    """Parse a binary-little-endian 3DGS PLY into a SplatMap.

    Raw scales pass through exp, raw opacity through sigmoid, and the
    quaternion is normalized. Splats whose activated opacity falls below
    opacity_floor are dropped. Extra per-vertex properties are ignored;
    list properties and big-endian files are rejected.
    """
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    n_vertices, dtype, body_start = _parse_ply_header(blob)
    need = body_start + n_vertices * dtype.itemsize
    if len(blob) < need:
        raise TruncatedBody(
            f"vertex block needs {need - body_start} bytes, file has {len(blob) - body_start}"
        )
    rows = np.frombuffer(blob, dtype=dtype, count=n_vertices, offset=body_start)
    splats = []
    for row in rows:
        quat = np.array([row["rot_0"], row["rot_1"], row["rot_2"], row["rot_3"]], dtype=np.float64)
        norm = np.linalg.norm(quat)
        if norm == 0:
            raise MalformedHeader("zero-norm quaternion in vertex data")
        opacity = float(sigmoid(float(row["opacity"])))
        if opacity < opacity_floor:
            continue
        splats.append(
            GaussianSplat(
                mean=np.array([row["x"], row["y"], row["z"]], dtype=np.float64),
                scale=np.exp(
                    np.array([row["scale_0"], row["scale_1"], row["scale_2"]], dtype=np.float64)
                ),
                orientation=quat / norm,
                opacity=opacity,
                color=np.array([row["f_dc_0"], row["f_dc_1"], row["f_dc_2"]], dtype=np.float64),
            )
        )
    return SplatMap.from_splats(splats)


def _parse_ply_header(blob: bytes) -> tuple[int, np.dtype, int]:
    end_tag = b"end_header\n"
    end = blob.find(end_tag)
    if not blob.startswith(b"ply") or end < 0:
        raise MalformedHeader("not a PLY file (missing 'ply' or 'end_header')")
    body_start = end + len(end_tag)
    lines = blob[:end].decode("ascii", errors="replace").splitlines()
    fmt_ok = False
    n_vertices = None
    fields: list[tuple[str, str]] = []
    in_vertex = False
    for line in lines[1:]:
        parts = line.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1:3] != ["binary_little_endian", "1.0"]:
                raise MalformedHeader(f"unsupported format {' '.join(parts[1:])}")
            fmt_ok = True
        elif parts[0] == "element":
            if parts[1] == "vertex":
                if n_vertices is not None:
                    raise MalformedHeader("duplicate vertex element")
                try:
                    n_vertices = int(parts[2])
                except (IndexError, ValueError):
                    raise MalformedHeader(f"bad element line: {line!r}") from None
                if n_vertices < 0:
                    raise MalformedHeader(f"negative vertex count {n_vertices}")
                in_vertex = True
            else:
                if n_vertices is None:
                    # An element before vertex would shift the body offset
                    # by an amount we cannot compute for list properties.
                    raise MalformedHeader(f"element {parts[1]!r} precedes vertex")
                in_vertex = False
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise MalformedHeader("list property in vertex element")
            if parts[1] not in _PLY_DTYPES:
                raise MalformedHeader(f"unknown property type {parts[1]!r}")
            fields.append((parts[2], _PLY_DTYPES[parts[1]]))
    if not fmt_ok:
        raise MalformedHeader("missing format line")
    if n_vertices is None:
        raise MalformedHeader("missing vertex element")
    names = {name for name, _ in fields}
    for prop in _PLY_PROPS:
        if prop not in names:
            raise MissingProperty(f"vertex element lacks property {prop!r}")
    return n_vertices, np.dtype(fields), body_start


def write_ply(splats, path) -> None:
    """Emit splats as a 3DGS PLY, inverting the load activations.

    Raw scale is log(scale); raw opacity is the logit, clamped so that
    opacity 0/1 stays representable. load_ply(write_ply(s)) matches s
    within 1e-6 after activations.
    """
    splats = list(splats)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(splats)}"]
    header += [f"property float {name}" for name in _PLY_PROPS]
    header.append("end_header")
    dtype = np.dtype([(name, "<f4") for name in _PLY_PROPS])
    rows = np.empty(len(splats), dtype=dtype)
    for i, s in enumerate(splats):
        op = min(max(float(s.opacity), 1e-7), 1.0 - 1e-7)
        rows[i] = (
            *s.mean,
            *np.log(s.scale),
            *s.orientation,
            np.log(op / (1.0 - op)),
            *s.color,
        )
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            fh.write(rows.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def query_radius(splat_map: SplatMap, center, r: float) -> list[int]:
    """Indices of splats whose mean lies within r of center (inclusive),
    ascending."""
    if r < 0:
        raise ValueError(f"radius {r} must be non-negative")
    if not len(splat_map):
        return []
    center = np.asarray(center, dtype=np.float64).reshape(3)
    lo = splat_map._cell_of(center - r)
    hi = splat_map._cell_of(center + r)
    candidates: list[int] = []
    for cx in range(lo[0], hi[0] + 1):
        for cy in range(lo[1], hi[1] + 1):
            for cz in range(lo[2], hi[2] + 1):
                candidates.extend(splat_map._cells.get((cx, cy, cz), ()))
    if not candidates:
        return []
    idx = np.array(sorted(candidates), dtype=int)
    d = np.linalg.norm(splat_map.means[idx] - center, axis=1)
    return [int(i) for i in idx[d <= r]]


def collision_check(
    splat_map: SplatMap,
    position,
    robot_radius: float = DEFAULT_ROBOT_RADIUS,
    sigma_gate: float = DEFAULT_SIGMA_GATE,
    warn_margin: float = DEFAULT_WARN_MARGIN,
) -> CollisionReport:
    """Ellipsoid-gate collision test against every nearby splat.

    A splat collides when the Mahalanobis distance of position under its
    rotated covariance, with each axis scale inflated by robot_radius,
    is at most sigma_gate. Candidates are pruned at radius
    sigma_gate*(max_scale+robot_radius) + warn_margin, which bounds the
    reach of both the CRITICAL and WARN conditions, so pruning never
    changes the verdict. WARN uses the radial surface-distance estimate
    |d|*(1 - gate/m), exact for isotropic splats.
    """
    if robot_radius <= 0:
        raise ValueError(f"robot_radius {robot_radius} must be positive")
    if sigma_gate <= 0:
        raise ValueError(f"sigma_gate {sigma_gate} must be positive")
    position = np.asarray(position, dtype=np.float64).reshape(3)
    reach = sigma_gate * (splat_map.max_scale + robot_radius) + max(warn_margin, 0.0)
    candidates = query_radius(splat_map, position, reach)
    if not candidates:
        return CollisionReport(False, float("inf"), None, AlertLevel.NONE)
    idx = np.array(candidates, dtype=int)
    d = position - splat_map.means[idx]
    local = np.einsum("nij,ni->nj", splat_map.rotations[idx], d)
    inflated = splat_map.scales[idx] + robot_radius
    m = np.sqrt(((local / inflated) ** 2).sum(axis=1))
    best = int(np.argmin(m))
    min_m = float(m[best])
    nearest = int(idx[best])
    if min_m <= sigma_gate:
        return CollisionReport(True, min_m, nearest, AlertLevel.CRITICAL)
    surface = np.linalg.norm(d, axis=1) * (1.0 - sigma_gate / m)
    level = AlertLevel.WARN if float(surface.min()) < warn_margin else AlertLevel.NONE
    return CollisionReport(False, min_m, nearest, level)


@dataclass(frozen=True)
class OccupancyGrid:
    """Axis-aligned voxel grid; occupied is a flat bool array in
    (ix*ny + iy)*nz + iz order over voxel indices."""

    origin: np.ndarray = field(repr=False)
    voxel_size: float = 0.1
    dims: tuple[int, int, int] = (1, 1, 1)
    occupied: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        dims = tuple(int(d) for d in self.dims)
        if self.voxel_size <= 0:
            raise ValueError(f"voxel_size {self.voxel_size} must be positive")
        if any(d <= 0 for d in dims):
            raise ValueError(f"dims must be positive, got {dims}")
        occ = self.occupied
        occ = np.zeros(int(np.prod(dims)), dtype=bool) if occ is None else np.asarray(occ, dtype=bool).reshape(-1)
        if occ.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(f"occupied length {occ.size} != product of dims {dims}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "occupied", occ)

    @property
    def n_voxels(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def as_3d(self) -> np.ndarray:
        return self.occupied.reshape(self.dims)

    def index_of(self, ix: int, iy: int, iz: int) -> int:
        return (ix * self.dims[1] + iy) * self.dims[2] + iz

    def is_occupied(self, ix: int, iy: int, iz: int) -> bool:
        return bool(self.occupied[self.index_of(ix, iy, iz)])

    def voxel_center(self, ix: int, iy: int, iz: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy, iz], dtype=np.float64) + 0.5) * self.voxel_size

    def voxel_of(self, point) -> tuple[int, int, int] | None:
        rel = (np.asarray(point, dtype=np.float64).reshape(3) - self.origin) / self.voxel_size
        idx = np.floor(rel).astype(int)
        if (idx < 0).any() or (idx >= np.array(self.dims)).any():
            return None
        return int(idx[0]), int(idx[1]), int(idx[2])


def build_occupancy(
    splat_map: SplatMap,
    voxel_size: float,
    sigma_gate: float = DEFAULT_SIGMA_GATE,
    robot_radius: float = DEFAULT_ROBOT_RADIUS,
) -> OccupancyGrid:
    """Voxelize the map: occupied iff collision_check at the voxel center
    collides with the same gate and radius.

    Built splat-by-splat over the exact axis-aligned box of each splat's
    inflated gate ellipsoid, so the result equals the per-voxel check
    without scanning the whole grid per splat.
    """
    if voxel_size <= 0:
        raise ValueError(f"voxel_size {voxel_size} must be positive")
    if not len(splat_map):
        raise EmptyMap("cannot build occupancy for a map with no splats")
    lo, hi = splat_map.bounds
    pad = 2.0 * (splat_map.max_scale + robot_radius)
    origin = lo - pad
    dims = np.maximum(np.ceil((hi + pad - origin) / voxel_size).astype(int), 1)
    occ = np.zeros(tuple(dims), dtype=bool)
    dims_arr = np.asarray(dims)
    for i in range(len(splat_map)):
        mean = splat_map.means[i]
        rot = splat_map.rotations[i]
        inflated = splat_map.scales[i] + robot_radius
        half = sigma_gate * np.sqrt((rot**2 * inflated**2).sum(axis=1))
        lo_idx = np.ceil((mean - half - origin) / voxel_size - 0.5).astype(int)
        hi_idx = np.floor((mean + half - origin) / voxel_size - 0.5).astype(int)
        lo_idx = np.maximum(lo_idx, 0)
        hi_idx = np.minimum(hi_idx, dims_arr - 1)
        if (lo_idx > hi_idx).any():
            continue
        ixs = np.arange(lo_idx[0], hi_idx[0] + 1)
        iys = np.arange(lo_idx[1], hi_idx[1] + 1)
        izs = np.arange(lo_idx[2], hi_idx[2] + 1)
        gx, gy, gz = np.meshgrid(ixs, iys, izs, indexing="ij")
        centers = origin + (np.stack([gx, gy, gz], axis=-1) + 0.5) * voxel_size
        local = (centers - mean) @ rot
        m2 = ((local / inflated) ** 2).sum(axis=-1)
        occ[gx, gy, gz] |= m2 <= sigma_gate**2
    return OccupancyGrid(
        origin=origin,
        voxel_size=voxel_size,
        dims=tuple(int(d) for d in dims),
        occupied=occ.reshape(-1),
    )


def write_occupancy(grid: OccupancyGrid, path) -> None:
    """Dump a grid as ZSOG: magic, origin 3xf32, voxel f32, dims 3xu32,
    then occupancy bit-packed little-endian."""
    header = _ZSOG_HEADER.pack(ZSOG_MAGIC, *grid.origin, grid.voxel_size, *grid.dims)
    bits = np.packbits(grid.occupied, bitorder="little")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(bits.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_occupancy(path) -> OccupancyGrid:
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < 4 or blob[:4] != ZSOG_MAGIC:
        raise BadMagic(f"expected {ZSOG_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < _ZSOG_HEADER.size:
        raise TruncatedFile(f"header needs {_ZSOG_HEADER.size} bytes, got {len(blob)}")
    _, ox, oy, oz, voxel, nx, ny, nz = _ZSOG_HEADER.unpack_from(blob)
    n = nx * ny * nz
    packed = np.frombuffer(blob, dtype=np.uint8, offset=_ZSOG_HEADER.size)
    if packed.size < (n + 7) // 8:
        raise TruncatedFile(f"occupancy needs {(n + 7) // 8} bytes, got {packed.size}")
    occupied = np.unpackbits(packed, count=n, bitorder="little").astype(bool)
    return OccupancyGrid(
        origin=np.array([ox, oy, oz], dtype=np.float64),
        voxel_size=float(voxel),
        dims=(int(nx), int(ny), int(nz)),
        occupied=occupied,
    )
