"""Per-object visual-attention likelihoods from the current gaze ray.

The gaze direction carries an isotropic angular Gaussian (default sigma
1 degree). A square window (default +-4 sigma) around the gaze is
rasterized in angular coordinates; each cell ray is cast against the
scene's primitives and assigned to the nearest hit, which implements
occlusion. An object's raw mass is the Gaussian mass over its cells;
normalizing across objects yields the likelihood vector.

Casting is done per object on the sub-window its bounding cone covers,
so off-gaze objects cost almost nothing; the full per-cell resolution
still decides occlusion exactly. Everything here is pure and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geom import quat_conj, quat_rotate, unit
from .scene import BoxGeom, CylinderGeom, DiscGeom, Pose, Scene, SceneObject

_EPS = 1e-9
_IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])

KIND_CYLINDER, KIND_DISC, KIND_BOX = 0, 1, 2


@dataclass(frozen=True)
class AoiConfig:
    sigma_deg: float = 1.0
    halfwidth_deg: Optional[float] = None  # defaults to 4 * sigma
    cells_per_deg: int = 10
    mass_floor: float = 1e-6

    def __post_init__(self):
        if self.sigma_deg <= 0:
            raise ValueError("sigma_deg must be positive")
        if self.cells_per_deg <= 0:
            raise ValueError("cells_per_deg must be positive")
        if self.halfwidth < 3.0 * self.sigma_deg:
            raise ValueError("raster window must cover at least 3 sigma each side")

    @property
    def halfwidth(self) -> float:
        return 4.0 * self.sigma_deg if self.halfwidth_deg is None else self.halfwidth_deg


@dataclass
class DepthBuffer:
    """Nearest-object index and depth per angular cell around the gaze."""

    object_ids: tuple[str, ...]
    index: np.ndarray  # (n, n) int32, -1 where no hit
    depth: np.ndarray  # (n, n) float, inf where no hit
    alpha_deg: np.ndarray  # cell centers along the window's u axis
    beta_deg: np.ndarray
    cell_area_deg2: float

    def object_at(self, i: int, j: int) -> Optional[str]:
        k = int(self.index[i, j])
        return None if k < 0 else self.object_ids[k]


# ---------------------------------------------------------------------------
# Window geometry

_GRID_CACHE: dict[AoiConfig, tuple[np.ndarray, np.ndarray, np.ndarray, float]] = {}


def _grid(cfg: AoiConfig):
    """(centers_deg, tan_centers, gaussian_cell_mass, cell_area) for cfg."""
    cached = _GRID_CACHE.get(cfg)
    if cached is not None:
        return cached
    n = int(round(2.0 * cfg.halfwidth * cfg.cells_per_deg))
    step = 1.0 / cfg.cells_per_deg
    centers = -cfg.halfwidth + (np.arange(n) + 0.5) * step
    tans = np.tan(np.deg2rad(centers))
    s2 = cfg.sigma_deg**2
    g1 = np.exp(-0.5 * centers**2 / s2)
    weights = np.outer(g1, g1) * (step * step / (2.0 * np.pi * s2))
    _GRID_CACHE[cfg] = (centers, tans, weights, step * step)
    return _GRID_CACHE[cfg]


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has large fixed overhead for single 3-vectors
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def window_basis_from_axes(
    cam_up: np.ndarray, cam_forward: np.ndarray, gaze_dir: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    u = _cross3(gaze_dir, cam_up)
    n = float(np.sqrt(u @ u))
    if n < 1e-9:
        u = _cross3(gaze_dir, cam_forward)
        n = float(np.sqrt(u @ u))
    u = u / n
    v = _cross3(u, gaze_dir)
    v = v / float(np.sqrt(v @ v))
    return u, v


def window_basis(viewpoint: Pose, gaze_dir: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """In-window (u, v) axes, derived from the viewpoint's camera up.

    Deriving the basis from the viewpoint orientation (instead of a world
    axis) makes the whole rasterization equivariant under rigid motions of
    scene + gaze + viewpoint together.
    """
    up = quat_rotate(viewpoint.orientation, np.array([0.0, 0.0, 1.0]))
    fwd = quat_rotate(viewpoint.orientation, np.array([0.0, 1.0, 0.0]))
    return window_basis_from_axes(up, fwd, gaze_dir)


# ---------------------------------------------------------------------------
# Compiled scene primitives


@dataclass
class ScenePrimitives:
    """Array form of a scene's objects for fast repeated ray casts.

    ``positions`` holds cylinder bases, disc centers, and box centers;
    streaming callers may overwrite rows in place as objects move.
    """

    ids: tuple[str, ...]
    kinds: np.ndarray  # (n,) int8
    positions: np.ndarray  # (n, 3)
    radii: np.ndarray  # (n,) cylinder/disc radius
    heights: np.ndarray  # (n,) cylinder height
    box_half: np.ndarray  # (n, 3) box half extents
    orientations: np.ndarray  # (n, 4) box orientation quaternions
    center_offset: np.ndarray  # (n, 3) volumetric center - position
    corners: np.ndarray  # (n, 8, 3) bounding-volume corners, kept in sync

    @classmethod
    def from_scene(cls, scene: Scene) -> "ScenePrimitives":
        n = len(scene.objects)
        kinds = np.zeros(n, dtype=np.int8)
        positions = np.zeros((n, 3))
        radii = np.zeros(n)
        heights = np.zeros(n)
        box_half = np.zeros((n, 3))
        orientations = np.tile(_IDENTITY, (n, 1))
        offset = np.zeros((n, 3))
        for k, o in enumerate(scene.objects):
            positions[k] = o.pose.position
            orientations[k] = o.pose.orientation
            g = o.geometry
            if isinstance(g, CylinderGeom):
                kinds[k] = KIND_CYLINDER
                radii[k] = g.radius
                heights[k] = g.height
                offset[k] = quat_rotate(o.pose.orientation, np.array([0.0, 0.0, g.height / 2.0]))
            elif isinstance(g, DiscGeom):
                kinds[k] = KIND_DISC
                radii[k] = g.radius
            else:
                kinds[k] = KIND_BOX
                box_half[k] = np.asarray(g.extents) / 2.0
        prims = cls(
            ids=tuple(o.id for o in scene.objects),
            kinds=kinds,
            positions=positions,
            radii=radii,
            heights=heights,
            box_half=box_half,
            orientations=orientations,
            center_offset=offset,
            corners=np.zeros((n, 8, 3)),
        )
        for k in range(n):
            prims.refresh_corners(k)
        return prims

    def refresh_corners(self, k: int) -> None:
        self.corners[k] = _bounding_corners(self, k)

    def move_object(self, k: int, position: np.ndarray) -> None:
        """Translate an object; corner cache shifts along."""
        delta = np.asarray(position, dtype=float) - self.positions[k]
        self.positions[k] = position
        self.corners[k] += delta[None, :]

    def index_of(self, object_id: str) -> int:
        return self.ids.index(object_id)

    def copy(self) -> "ScenePrimitives":
        return ScenePrimitives(
            ids=self.ids,
            kinds=self.kinds.copy(),
            positions=self.positions.copy(),
            radii=self.radii.copy(),
            heights=self.heights.copy(),
            box_half=self.box_half.copy(),
            orientations=self.orientations.copy(),
            center_offset=self.center_offset.copy(),
            corners=self.corners.copy(),
        )

    @property
    def centers(self) -> np.ndarray:
        return self.positions + self.center_offset


# ---------------------------------------------------------------------------
# Ray-primitive intersections (vectorized over rays)


def _intersect_cylinder(origin, dirs, base, radius, height, orientation=None):
    """Dirs may be any (..., 3) array; returns hit distances shaped (...).

    The cylinder runs along its local +z from the base; a non-identity
    orientation is handled by rotating the rays into the object frame.
    """
    if orientation is not None and not np.array_equal(orientation, _IDENTITY):
        qi = quat_conj(orientation)
        o = quat_rotate(qi, origin - base)
        dirs = quat_rotate(qi, dirs)
    else:
        o = origin - base
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    a = dx * dx + dy * dy
    b = 2.0 * (o[0] * dx + o[1] * dy)
    c = o[0] * o[0] + o[1] * o[1] - radius * radius
    disc = b * b - 4.0 * a * c
    t_best = np.full(dirs.shape[:-1], np.inf)
    outside = c > 0.0  # z(t) is linear, so an outside origin can only see
    # the near lateral root plus the cap facing it
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        ok = (disc >= 0.0) & (a > _EPS)
        two_a = 2.0 * np.where(a > _EPS, a, 1.0)
        roots = (-1.0,) if outside else (-1.0, 1.0)
        for sign in roots:
            t = (-b + sign * sq) / two_a
            z = o[2] + t * dz
            hit = ok & (t > _EPS) & (z >= 0.0) & (z <= height)
            t_best = np.where(hit & (t < t_best), t, t_best)
        if outside:
            planes = (height,) if o[2] > height else (0.0,) if o[2] < 0.0 else ()
        else:
            planes = (height, 0.0)
        for z_plane in planes:
            t = (z_plane - o[2]) / dz
            px = o[0] + t * dx
            py = o[1] + t * dy
            hit = np.isfinite(t) & (t > _EPS) & (px * px + py * py <= radius * radius)
            t_best = np.where(hit & (t < t_best), t, t_best)
    return t_best


def _intersect_disc(origin, dirs, center, radius, orientation=None):
    if orientation is not None and not np.array_equal(orientation, _IDENTITY):
        qi = quat_conj(orientation)
        o = quat_rotate(qi, origin - center)
        dirs = quat_rotate(qi, dirs)
    else:
        o = origin - center
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -o[2] / dz
    px = o[0] + t * dirs[..., 0]
    py = o[1] + t * dirs[..., 1]
    hit = np.isfinite(t) & (t > _EPS) & (px * px + py * py <= radius * radius)
    return np.where(hit, t, np.inf)


def _intersect_box(origin, dirs, position, orientation, half):
    if np.array_equal(orientation, _IDENTITY):
        o = origin - position
        d = dirs
    else:
        qi = quat_conj(orientation)
        o = quat_rotate(qi, origin - position)
        d = quat_rotate(qi, dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    lo = np.where(np.isnan(lo), -np.inf, lo)
    hi = np.where(np.isnan(hi), np.inf, hi)
    tmin = lo.max(axis=-1)
    tmax = hi.min(axis=-1)
    hit = (tmax >= tmin) & (tmin > _EPS)
    return np.where(hit, tmin, np.inf)


def _intersect_primitive(prims: ScenePrimitives, k: int, origin, dirs):
    kind = prims.kinds[k]
    if kind == KIND_CYLINDER:
        return _intersect_cylinder(
            origin, dirs, prims.positions[k], prims.radii[k], prims.heights[k], prims.orientations[k]
        )
    if kind == KIND_DISC:
        return _intersect_disc(origin, dirs, prims.positions[k], prims.radii[k], prims.orientations[k])
    return _intersect_box(origin, dirs, prims.positions[k], prims.orientations[k], prims.box_half[k])


# ---------------------------------------------------------------------------
# Compiled per-cell cast kernel

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _cast_kernel(
    kinds, positions, radii, heights, box_half, quats, bounds, origin, gaze, u, v, tans, depth, index
):  # pragma: no cover - exercised via cast_depth
    eps = 1e-9
    for k in range(kinds.shape[0]):
        i0, i1, j0, j1 = bounds[k, 0], bounds[k, 1], bounds[k, 2], bounds[k, 3]
        if i0 < 0:
            continue
        kind = kinds[k]
        ox = origin[0] - positions[k, 0]
        oy = origin[1] - positions[k, 1]
        oz = origin[2] - positions[k, 2]
        qx, qy, qz, qw = quats[k, 0], quats[k, 1], quats[k, 2], quats[k, 3]
        oriented = not (qx == 0.0 and qy == 0.0 and qz == 0.0 and qw == 1.0)
        if oriented:
            # rotate the origin offset into the object frame (conjugate)
            tx = 2.0 * (-qy * oz + qz * oy)
            ty = 2.0 * (-qz * ox + qx * oz)
            tz = 2.0 * (-qx * oy + qy * ox)
            lox = ox + qw * tx + (-qy * tz + qz * ty)
            loy = oy + qw * ty + (-qz * tx + qx * tz)
            loz = oz + qw * tz + (-qx * ty + qy * tx)
            ox, oy, oz = lox, loy, loz
        radius = radii[k]
        height = heights[k]
        c_lat = ox * ox + oy * oy - radius * radius
        hx, hy, hz = box_half[k, 0], box_half[k, 1], box_half[k, 2]
        for i in range(i0, i1):
            ta = tans[i]
            for j in range(j0, j1):
                tb = tans[j]
                dx = gaze[0] + ta * u[0] + tb * v[0]
                dy = gaze[1] + ta * u[1] + tb * v[1]
                dz = gaze[2] + ta * u[2] + tb * v[2]
                inv = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
                dx *= inv
                dy *= inv
                dz *= inv
                if oriented:
                    tx = 2.0 * (-qy * dz + qz * dy)
                    ty = 2.0 * (-qz * dx + qx * dz)
                    tz = 2.0 * (-qx * dy + qy * dx)
                    ndx = dx + qw * tx + (-qy * tz + qz * ty)
                    ndy = dy + qw * ty + (-qz * tx + qx * tz)
                    ndz = dz + qw * tz + (-qx * ty + qy * tx)
                    dx, dy, dz = ndx, ndy, ndz
                t_best = np.inf
                if kind == 0:  # cylinder along local +z from the base
                    a = dx * dx + dy * dy
                    b = 2.0 * (ox * dx + oy * dy)
                    disc = b * b - 4.0 * a * c_lat
                    outside = c_lat > 0.0
                    if disc >= 0.0 and a > eps:
                        sq = np.sqrt(disc)
                        t = (-b - sq) / (2.0 * a)
                        z = oz + t * dz
                        if t > eps and 0.0 <= z <= height and t < t_best:
                            t_best = t
                        if not outside:
                            t = (-b + sq) / (2.0 * a)
                            z = oz + t * dz
                            if t > eps and 0.0 <= z <= height and t < t_best:
                                t_best = t
                    if dz != 0.0:
                        if (not outside) or oz > height:
                            t = (height - oz) / dz
                            if t > eps and t < t_best:
                                px = ox + t * dx
                                py = oy + t * dy
                                if px * px + py * py <= radius * radius:
                                    t_best = t
                        if (not outside) or oz < 0.0:
                            t = (0.0 - oz) / dz
                            if t > eps and t < t_best:
                                px = ox + t * dx
                                py = oy + t * dy
                                if px * px + py * py <= radius * radius:
                                    t_best = t
                elif kind == 1:  # disc in the local z = 0 plane
                    if dz != 0.0:
                        t = -oz / dz
                        if t > eps:
                            px = ox + t * dx
                            py = oy + t * dy
                            if px * px + py * py <= radius * radius:
                                t_best = t
                else:  # box, slab method in the local frame
                    tmin = -np.inf
                    tmax = np.inf
                    ok = True
                    for ax in range(3):
                        if ax == 0:
                            o_ax, d_ax, h_ax = ox, dx, hx
                        elif ax == 1:
                            o_ax, d_ax, h_ax = oy, dy, hy
                        else:
                            o_ax, d_ax, h_ax = oz, dz, hz
                        if d_ax == 0.0:
                            if o_ax < -h_ax or o_ax > h_ax:
                                ok = False
                                break
                        else:
                            t1 = (-h_ax - o_ax) / d_ax
                            t2 = (h_ax - o_ax) / d_ax
                            if t1 > t2:
                                t1, t2 = t2, t1
                            if t1 > tmin:
                                tmin = t1
                            if t2 < tmax:
                                tmax = t2
                    if ok and tmax >= tmin and tmin > eps:
                        t_best = tmin
                if t_best < depth[i, j]:
                    depth[i, j] = t_best
                    index[i, j] = k


@njit(cache=True)
def _bounds_kernel(corners, origin, gaze, u, v, tans, bounds):  # pragma: no cover
    n_obj = corners.shape[0]
    n = tans.shape[0]
    tan_lo, tan_hi = tans[0], tans[n - 1]
    for k in range(n_obj):
        ta0 = np.inf
        ta1 = -np.inf
        tb0 = np.inf
        tb1 = -np.inf
        behind_any = False
        ahead_any = False
        for c in range(8):
            rx = corners[k, c, 0] - origin[0]
            ry = corners[k, c, 1] - origin[1]
            rz = corners[k, c, 2] - origin[2]
            den = rx * gaze[0] + ry * gaze[1] + rz * gaze[2]
            if den <= 1e-9:
                behind_any = True
                continue
            ahead_any = True
            ta = (rx * u[0] + ry * u[1] + rz * u[2]) / den
            tb = (rx * v[0] + ry * v[1] + rz * v[2]) / den
            if ta < ta0:
                ta0 = ta
            if ta > ta1:
                ta1 = ta
            if tb < tb0:
                tb0 = tb
            if tb > tb1:
                tb1 = tb
        if not ahead_any:
            bounds[k, 0] = -1  # entirely behind: unhittable
            continue
        if behind_any:
            bounds[k, 0] = 0  # straddles the viewpoint plane: full window
            bounds[k, 1] = n
            bounds[k, 2] = 0
            bounds[k, 3] = n
            continue
        if ta1 < tan_lo or ta0 > tan_hi or tb1 < tan_lo or tb0 > tan_hi:
            bounds[k, 0] = -1
            continue
        i0 = np.searchsorted(tans, ta0) - 1
        i1 = np.searchsorted(tans, ta1) + 1
        j0 = np.searchsorted(tans, tb0) - 1
        j1 = np.searchsorted(tans, tb1) + 1
        if i0 < 0:
            i0 = 0
        if i1 > n:
            i1 = n
        if j0 < 0:
            j0 = 0
        if j1 > n:
            j1 = n
        if i0 >= i1 or j0 >= j1:
            bounds[k, 0] = -1
            continue
        bounds[k, 0] = i0
        bounds[k, 1] = i1
        bounds[k, 2] = j0
        bounds[k, 3] = j1


@njit(cache=True)
def _mass_kernel(index, weights, out):  # pragma: no cover
    n = index.shape[0]
    for i in range(n):
        for j in range(n):
            k = index[i, j]
            if k >= 0:
                out[k] += weights[i, j]


# ---------------------------------------------------------------------------
# Sub-window casting


_CUBE_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


def _bounding_corners(prims: ScenePrimitives, k: int) -> np.ndarray:
    """Extreme points of a volume enclosing the object (world frame)."""
    pos = prims.positions[k]
    kind = prims.kinds[k]
    q = prims.orientations[k]
    if kind == KIND_CYLINDER:
        r, h = prims.radii[k], prims.heights[k]
        local = _CUBE_SIGNS * np.array([r, r, h / 2.0]) + np.array([0.0, 0.0, h / 2.0])
    elif kind == KIND_DISC:
        local = _CUBE_SIGNS * np.array([prims.radii[k], prims.radii[k], 0.0])
    else:
        local = _CUBE_SIGNS * prims.box_half[k]
    if not np.array_equal(q, _IDENTITY):
        local = quat_rotate(q, local)
    return pos + local


def _object_bounds(
    prims: ScenePrimitives, origin, gaze_dir, u, v, tans
) -> np.ndarray:
    """Cell-index bounds (i0, i1, j0, j1) per object; i0 = -1 skips it.

    Bounds come from central projection of each object's bounding-box
    corners (gnomonic projection preserves convexity), so cells outside
    them cannot hit the object and the cast equals a full-grid cast.
    """
    n = len(tans)
    tan_lo, tan_hi = tans[0], tans[-1]
    rel = prims.corners - origin[None, None, :]  # (n_obj, 8, 3)
    den = rel @ gaze_dir
    behind = den <= _EPS
    behind_all = behind.all(axis=1)
    straddle = behind.any(axis=1) & ~behind_all
    safe_den = np.where(behind, 1.0, den)
    ta = (rel @ u) / safe_den
    tb = (rel @ v) / safe_den
    ta0s = np.where(behind, np.inf, ta).min(axis=1)
    ta1s = np.where(behind, -np.inf, ta).max(axis=1)
    tb0s = np.where(behind, np.inf, tb).min(axis=1)
    tb1s = np.where(behind, -np.inf, tb).max(axis=1)
    outside = (ta1s < tan_lo) | (ta0s > tan_hi) | (tb1s < tan_lo) | (tb0s > tan_hi)

    bounds = np.full((len(prims.ids), 4), -1, dtype=np.int64)
    for k in np.nonzero(~behind_all & (straddle | ~outside))[0]:
        if straddle[k]:
            # straddles the viewpoint plane: no usable projection bound
            bounds[k] = (0, n, 0, n)
            continue
        # +-1 cell: centers bound cell midpoints, rays extend half a cell
        i0 = max(0, int(np.searchsorted(tans, ta0s[k])) - 1)
        i1 = min(n, int(np.searchsorted(tans, ta1s[k])) + 1)
        j0 = max(0, int(np.searchsorted(tans, tb0s[k])) - 1)
        j1 = min(n, int(np.searchsorted(tans, tb1s[k])) + 1)
        if i0 < i1 and j0 < j1:
            bounds[k] = (i0, i1, j0, j1)
    return bounds


def _cast_depth_numpy(prims, origin, gaze_dir, u, v, tans, bounds, depth, index):
    dirs_grid = None  # built lazily: gazes far from everything skip it
    for k in range(len(prims.ids)):
        i0, i1, j0, j1 = bounds[k]
        if i0 < 0:
            continue
        if dirs_grid is None:
            dirs_grid = (
                gaze_dir[None, None, :]
                + tans[:, None, None] * u[None, None, :]
                + tans[None, :, None] * v[None, None, :]
            )
            dirs_grid /= np.sqrt(np.einsum("ijk,ijk->ij", dirs_grid, dirs_grid))[:, :, None]
        t = _intersect_primitive(prims, k, origin, dirs_grid[i0:i1, j0:j1])
        dview = depth[i0:i1, j0:j1]
        closer = t < dview
        if closer.any():
            dview[closer] = t[closer]
            index[i0:i1, j0:j1][closer] = k


def cast_depth(
    prims: ScenePrimitives,
    origin: np.ndarray,
    gaze_dir: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    cfg: AoiConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """(depth, index) grids for the window, nearest object per cell.

    Each object is cast only over the sub-window its silhouette can
    touch; the per-cell work runs in a compiled kernel when numba is
    available, with an equivalent vectorized-numpy fallback.
    """
    _, tans, _, _ = _grid(cfg)
    n = len(tans)
    depth = np.full((n, n), np.inf)
    index = np.full((n, n), -1, dtype=np.int32)
    if _HAVE_NUMBA:
        bounds = np.empty((len(prims.ids), 4), dtype=np.int64)
        _bounds_kernel(
            prims.corners, np.asarray(origin, dtype=float),
            np.asarray(gaze_dir, dtype=float), u, v, tans, bounds,
        )
    else:
        bounds = _object_bounds(prims, origin, gaze_dir, u, v, tans)
    if _HAVE_NUMBA:
        _cast_kernel(
            prims.kinds,
            prims.positions,
            prims.radii,
            prims.heights,
            prims.box_half,
            prims.orientations,
            bounds,
            np.asarray(origin, dtype=float),
            np.asarray(gaze_dir, dtype=float),
            u,
            v,
            tans,
            depth,
            index,
        )
    else:
        _cast_depth_numpy(prims, origin, gaze_dir, u, v, tans, bounds, depth, index)
    return depth, index


def masses_from_cast(
    prims: ScenePrimitives, index: np.ndarray, cfg: AoiConfig
) -> np.ndarray:
    _, _, weights, _ = _grid(cfg)
    if _HAVE_NUMBA:
        out = np.zeros(len(prims.ids))
        _mass_kernel(index, weights, out)
        return out
    counts = np.bincount(index.ravel() + 1, weights=weights.ravel(), minlength=len(prims.ids) + 1)
    return counts[1:]


def normalize_masses(masses: np.ndarray, cfg: AoiConfig) -> np.ndarray:
    total = masses.sum()
    if total < cfg.mass_floor:
        return np.zeros_like(masses)
    return masses / total


# ---------------------------------------------------------------------------
# Public operations


def rasterize_depth(
    scene: Scene, viewpoint: Pose, gaze_dir: np.ndarray, cfg: AoiConfig = AoiConfig()
) -> DepthBuffer:
    """Cast one ray per window cell and keep the nearest hit per cell."""
    gaze_dir = np.asarray(gaze_dir, dtype=float)
    centers_deg, _, _, cell_area = _grid(cfg)
    u, v = window_basis(viewpoint, gaze_dir)
    prims = ScenePrimitives.from_scene(scene)
    depth, index = cast_depth(prims, viewpoint.position, gaze_dir, u, v, cfg)
    return DepthBuffer(
        object_ids=prims.ids,
        index=index,
        depth=depth,
        alpha_deg=centers_deg,
        beta_deg=centers_deg,
        cell_area_deg2=cell_area,
    )


def aoi_raw_masses(
    scene: Scene, viewpoint: Pose, gaze_dir: np.ndarray, cfg: AoiConfig = AoiConfig()
) -> dict[str, float]:
    """Unnormalized gaze-Gaussian mass over each object's visible cells."""
    buf = rasterize_depth(scene, viewpoint, gaze_dir, cfg)
    prims_ids = buf.object_ids
    _, _, weights, _ = _grid(cfg)
    counts = np.bincount(buf.index.ravel() + 1, weights=weights.ravel(), minlength=len(prims_ids) + 1)
    return {oid: float(counts[k + 1]) for k, oid in enumerate(prims_ids)}


def aoi_likelihoods(
    scene: Scene, viewpoint: Pose, gaze_dir: np.ndarray, cfg: AoiConfig = AoiConfig()
) -> dict[str, float]:
    """Per-object attention likelihoods, normalized across objects.

    Returns the all-zero sentinel when the total raw mass is below
    ``cfg.mass_floor`` (gaze far from every object).
    """
    raw = aoi_raw_masses(scene, viewpoint, gaze_dir, cfg)
    total = sum(raw.values())
    if total < cfg.mass_floor:
        return {k: 0.0 for k in raw}
    return {k: m / total for k, m in raw.items()}


def depth_buffer_to_pgm(buf: DepthBuffer, path) -> None:
    """Dump the depth grid as a binary PGM image for visual inspection."""
    depth = buf.depth.T[::-1]  # beta up, alpha right
    finite = np.isfinite(depth)
    img = np.zeros(depth.shape, dtype=np.uint8)
    if finite.any():
        lo, hi = depth[finite].min(), depth[finite].max()
        span = (hi - lo) or 1.0
        img[finite] = (255 - 205 * (depth[finite] - lo) / span).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())
