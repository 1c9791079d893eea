"""2-D occupancy grids and the signed distance field the controller queries.

The workspace is an authored top-down map: axis-aligned rectangles rasterized
onto a regular grid, converted once into a Euclidean signed distance field
(ESDF). Distances are positive in free space, negative inside obstacles, and
capped at DISTANCE_CAP so an empty map still yields finite values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

# Free-space distances are capped here; the obstacle penalty is numerically
# zero long before this range, so the cap never influences control.
DISTANCE_CAP = 10.0


class WorldError(ValueError):
    """Raised for invalid grids or environment specs."""


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean occupancy over a regular grid.

    ``occupied[iy, ix]`` covers the square whose corner is
    ``origin + (ix, iy) * resolution``; cell centers sit half a cell in.
    """

    resolution: float
    origin: tuple[float, float]
    occupied: np.ndarray  # bool, shape (height_cells, width_cells)

    def __post_init__(self):
        occ = np.asarray(self.occupied, dtype=bool)
        object.__setattr__(self, "occupied", occ)
        if occ.ndim != 2 or occ.shape[0] < 2 or occ.shape[1] < 2:
            raise WorldError("grid must be at least 2x2 cells")
        if self.resolution <= 0:
            raise WorldError("resolution must be positive")
        if occ.all():
            raise WorldError("no free space")

    @property
    def width_cells(self) -> int:
        return self.occupied.shape[1]

    @property
    def height_cells(self) -> int:
        return self.occupied.shape[0]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of all cell centers as (xs, ys) 1-D arrays."""
        xs = self.origin[0] + (np.arange(self.width_cells) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(self.height_cells) + 0.5) * self.resolution
        return xs, ys

    def to_json(self) -> str:
        """Portable text dump (rows of '0'/'1') for golden tests."""
        return json.dumps(
            {
                "resolution": self.resolution,
                "origin": list(self.origin),
                "rows": ["".join("1" if v else "0" for v in row) for row in self.occupied],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "OccupancyGrid":
        d = json.loads(text)
        occ = np.array([[c == "1" for c in row] for row in d["rows"]], dtype=bool)
        return cls(resolution=d["resolution"], origin=tuple(d["origin"]), occupied=occ)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Room geometry: outer extent plus axis-aligned obstacle rectangles.

    Rectangles are (xmin, ymin, xmax, ymax) in meters, world frame.
    """

    room_width: float = 8.0
    room_height: float = 6.0
    resolution: float = 0.05
    origin: tuple[float, float] = (-4.0, -3.0)
    rectangles: tuple[tuple[float, float, float, float], ...] = field(
        default_factory=lambda: DEFAULT_RECTANGLES
    )

    def to_json(self) -> str:
        return json.dumps(
            {
                "room_width": self.room_width,
                "room_height": self.room_height,
                "resolution": self.resolution,
                "origin": list(self.origin),
                "rectangles": [list(r) for r in self.rectangles],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentSpec":
        d = json.loads(text)
        return cls(
            room_width=d["room_width"],
            room_height=d["room_height"],
            resolution=d["resolution"],
            origin=tuple(d["origin"]),
            rectangles=tuple(tuple(r) for r in d["rectangles"]),
        )


# Default layout: two side walls the arm can actually reach plus a centered
# patient table. Authored values; kept in one place so runs are reproducible.
DEFAULT_RECTANGLES: tuple[tuple[float, float, float, float], ...] = (
    (-4.0, -3.0, -3.6, 3.0),   # left wall
    (3.6, -3.0, 4.0, 3.0),     # right wall
    (-1.0, -0.3, 1.0, 0.3),    # table, 2.0 m x 0.6 m centered at the origin
)


def builtin_environment(spec: EnvironmentSpec | None = None) -> OccupancyGrid:
    """Rasterize an EnvironmentSpec into an OccupancyGrid.

    A cell is occupied when its center lies inside any rectangle. Degenerate
    or out-of-room rectangles are rejected.
    """
    spec = spec or EnvironmentSpec()
    nx = int(round(spec.room_width / spec.resolution))
    ny = int(round(spec.room_height / spec.resolution))
    if nx < 2 or ny < 2:
        raise WorldError("room too small for the given resolution")
    ox, oy = spec.origin
    occ = np.zeros((ny, nx), dtype=bool)
    xs = ox + (np.arange(nx) + 0.5) * spec.resolution
    ys = oy + (np.arange(ny) + 0.5) * spec.resolution
    for xmin, ymin, xmax, ymax in spec.rectangles:
        if xmax <= xmin or ymax <= ymin:
            raise WorldError(f"degenerate rectangle {(xmin, ymin, xmax, ymax)}")
        if xmin < ox - 1e-9 or ymin < oy - 1e-9 or xmax > ox + spec.room_width + 1e-9 \
                or ymax > oy + spec.room_height + 1e-9:
            raise WorldError(f"rectangle {(xmin, ymin, xmax, ymax)} outside room bounds")
        col = (xs > xmin) & (xs < xmax)
        row = (ys > ymin) & (ys < ymax)
        occ[np.ix_(row, col)] = True
    return OccupancyGrid(resolution=spec.resolution, origin=(ox, oy), occupied=occ)


class Esdf:
    """Signed distance field over the same grid geometry as its source.

    Cell values are distances between cell centers: positive to the nearest
    occupied-cell center on free cells, negative to the nearest free-cell
    center on occupied cells. Immutable after construction, so concurrent
    read-only queries are safe.
    """

    def __init__(self, resolution: float, origin: tuple[float, float], distance: np.ndarray):
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        self.distance = np.asarray(distance, dtype=float)
        self.distance.setflags(write=False)

    @property
    def width_cells(self) -> int:
        return self.distance.shape[1]

    @property
    def height_cells(self) -> int:
        return self.distance.shape[0]

    def in_bounds(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        ox, oy = self.origin
        return (ox <= x <= ox + self.width_cells * self.resolution
                and oy <= y <= oy + self.height_cells * self.resolution)

    def _cell_coords(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Continuous cell-center coordinates plus an out-of-map flag."""
        gx = (pts[..., 0] - self.origin[0]) / self.resolution - 0.5
        gy = (pts[..., 1] - self.origin[1]) / self.resolution - 0.5
        out = (gx < -0.5) | (gx > self.width_cells - 0.5) \
            | (gy < -0.5) | (gy > self.height_cells - 0.5)
        return gx, gy, out

    def query(self, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized bilinear distance with the exact in-cell gradient.

        Returns (values, gradients, out_of_map). Out-of-map points are clamped
        to the cell-center hull (constant extension) and flagged; the query
        never aborts, so a roll-out that grazes the map edge keeps running.
        The gradient is the derivative of the bilinear patch itself, which is
        what the solver's analytic cost gradient needs.
        """
        pts = np.asarray(pts, dtype=float)
        gx, gy, out = self._cell_coords(pts)
        gx = np.clip(gx, 0.0, self.width_cells - 1.0)
        gy = np.clip(gy, 0.0, self.height_cells - 1.0)
        x0 = np.minimum(gx.astype(int), self.width_cells - 2)
        y0 = np.minimum(gy.astype(int), self.height_cells - 2)
        wx = gx - x0
        wy = gy - y0
        d = self.distance
        f00 = d[y0, x0]
        f10 = d[y0, x0 + 1]
        f01 = d[y0 + 1, x0]
        f11 = d[y0 + 1, x0 + 1]
        vals = ((1 - wx) * (1 - wy) * f00 + wx * (1 - wy) * f10
                + (1 - wx) * wy * f01 + wx * wy * f11)
        ddx = ((1 - wy) * (f10 - f00) + wy * (f11 - f01)) / self.resolution
        ddy = ((1 - wx) * (f01 - f00) + wx * (f11 - f10)) / self.resolution
        grads = np.stack([ddx, ddy], axis=-1)
        return vals, grads, out


@dataclass(frozen=True)
class DistanceQuery:
    value: float
    out_of_map: bool


@dataclass(frozen=True)
class GradientQuery:
    vector: np.ndarray
    one_sided: bool


def build_esdf(grid: OccupancyGrid, cap: float = DISTANCE_CAP) -> Esdf:
    """Exact Euclidean distance transform of the grid, signed and capped."""
    occ = grid.occupied
    if not occ.any():
        dist = np.full(occ.shape, cap, dtype=float)
    else:
        # distance_transform_edt measures nonzero cells to the nearest zero
        # cell, i.e. between cell centers, which is exactly the contract.
        d_free = distance_transform_edt(~occ, sampling=grid.resolution)
        d_occ = distance_transform_edt(occ, sampling=grid.resolution)
        dist = np.where(occ, -d_occ, np.minimum(d_free, cap))
    return Esdf(resolution=grid.resolution, origin=grid.origin, distance=dist)


def signed_distance(esdf: Esdf, p) -> DistanceQuery:
    """Bilinear interpolation of the field at a world point."""
    vals, _, out = esdf.query(np.asarray(p, dtype=float).reshape(1, 2))
    flag = bool(out[0]) or not esdf.in_bounds(p)
    return DistanceQuery(value=float(vals[0]), out_of_map=flag)


def distance_gradient(esdf: Esdf, p) -> GradientQuery:
    """Finite-difference gradient of signed_distance with step = resolution.

    Inside a one-cell margin a central difference is used; nearer the edge the
    difference degrades to one-sided and the result is flagged. The vector is
    a preferred escape direction, so its norm is capped at 1: the raw slope
    can reach ~2 across the sign transition at an obstacle boundary, where the
    field switches between distance-to-occupied and distance-to-free.
    """
    p = np.asarray(p, dtype=float)
    h = esdf.resolution
    ox, oy = esdf.origin
    xmax = ox + esdf.width_cells * h
    ymax = oy + esdf.height_cells * h
    one_sided = not (ox + h <= p[0] <= xmax - h and oy + h <= p[1] <= ymax - h)
    grad = np.zeros(2)
    for axis in range(2):
        lo = p.copy()
        hi = p.copy()
        lo[axis] -= h
        hi[axis] += h
        bounds = (ox, xmax) if axis == 0 else (oy, ymax)
        if hi[axis] > bounds[1]:
            hi = p.copy()
        if lo[axis] < bounds[0]:
            lo = p.copy()
        span = hi[axis] - lo[axis]
        if span <= 0:
            continue
        grad[axis] = (signed_distance(esdf, hi).value - signed_distance(esdf, lo).value) / span
    norm = float(np.linalg.norm(grad))
    if norm > 1.0:
        grad /= norm
    return GradientQuery(vector=grad, one_sided=one_sided)
