"""Target-path-analysis features: how likely each object (or the other
hand) is the destination of the current hand motion.

For every candidate, ideal reach trajectories are built from its approach
points with a Hobby-style cubic Bezier; the hand's own trajectory is
extrapolated with a constant-velocity model whose uncertainty grows per
step. The candidate score is the smallest velocity-weighted sum of
pointwise Bhattacharyya distances between the two eight-point Gaussian
paths, and scores map to a distribution through a low-temperature softmax.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geom import unit
from .scene import (
    BoxGeom,
    GRIPPER_EXTENTS,
    HandState,
    ObjectKind,
    Pose,
    Scene,
    SceneObject,
)

_EPS = 1e-12
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class TpaConfig:
    n_points: int = 8
    softmax_temperature: float = 0.05
    horizon_s: float = 0.35
    pred_sigma0_m: float = 0.01  # hand position uncertainty now
    pred_step_sigma_m: float = 0.015  # added std-dev per prediction step
    path_sigma_m: float = 0.02  # candidate path uncertainty at the destination
    path_back_growth: float = 0.5  # variance growth per step away from it
    v_eps: float = 0.02  # planar speed below which the current-xy approach is dropped
    held_z_factor: float = 1.05  # held object forced just past the farthest candidate


class ApproachKind(enum.Enum):
    TOP_DOWN = "top_down"
    CENTER_CURRENT_XY = "center_current_xy"
    CENTER_STRAIGHT_LINE = "center_straight_line"


@dataclass(frozen=True)
class ApproachPoint:
    location: np.ndarray
    direction: np.ndarray  # unit approach tangent at the destination
    kind: ApproachKind


@dataclass
class GaussianPath:
    means: np.ndarray  # (n, 3)
    covs: np.ndarray  # (n, 3, 3) symmetric positive-definite
    velocities: np.ndarray  # (n, 3) tangents, zero where undefined

    @property
    def n_points(self) -> int:
        return len(self.means)


def approach_points(
    obj: SceneObject, hand: HandState, cfg: TpaConfig = TpaConfig()
) -> list[ApproachPoint]:
    """Candidate destinations with approach directions for one object.

    Always includes the top-down grasp point and the straight hand-to-center
    line; the current-planar-direction variant is dropped while the hand is
    (nearly) still.
    """
    pts = [ApproachPoint(location=obj.top, direction=np.array([0.0, 0.0, -1.0]), kind=ApproachKind.TOP_DOWN)]
    planar = np.array([hand.velocity[0], hand.velocity[1], 0.0])
    if np.linalg.norm(planar) >= cfg.v_eps:
        pts.append(
            ApproachPoint(location=obj.center, direction=unit(planar), kind=ApproachKind.CENTER_CURRENT_XY)
        )
    line = obj.center - hand.position
    direction = unit(line) if np.linalg.norm(line) > _EPS else np.array([0.0, 0.0, -1.0])
    pts.append(ApproachPoint(location=obj.center, direction=direction, kind=ApproachKind.CENTER_STRAIGHT_LINE))
    return pts


def _hobby_rho(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Hobby's velocity function for Bezier control-point lengths."""
    st, sp = np.sin(theta), np.sin(phi)
    ct, cp = np.cos(theta), np.cos(phi)
    num = 2.0 + math.sqrt(2.0) * (st - sp / 16.0) * (sp - st / 16.0) * (ct - cp)
    den = 1.0 + 0.5 * (_SQRT5 - 1.0) * ct + 0.5 * (3.0 - _SQRT5) * cp
    return num / den


def _angles_to_chord(d: np.ndarray, chord_dir: np.ndarray) -> np.ndarray:
    c = np.clip(np.sum(d * chord_dir, axis=-1), -1.0, 1.0)
    return np.arccos(c)


def _path_covariances(n: int, cfg: TpaConfig) -> np.ndarray:
    j = np.arange(n)
    scale = cfg.path_sigma_m**2 * (1.0 + cfg.path_back_growth * (n - 1 - j))
    return scale[:, None, None] * np.eye(3)[None, :, :]


def hobby_path(
    start_position,
    start_direction,
    end: ApproachPoint,
    n: int = 8,
    cfg: TpaConfig = TpaConfig(),
) -> GaussianPath:
    """Cubic Bezier from the hand to an approach point.

    Endpoint tangents follow the given directions; interior control points
    use Hobby's velocity formula, which degenerates to the straight chord
    when both tangents align with it. Point uncertainty shrinks toward the
    destination.
    """
    p0 = np.asarray(start_position, dtype=float)
    p3 = np.asarray(end.location, dtype=float)
    chord = p3 - p0
    length = float(np.linalg.norm(chord))
    covs = _path_covariances(n, cfg)
    if length < _EPS:
        means = np.tile(p0, (n, 1))
        return GaussianPath(means=means, covs=covs, velocities=np.zeros((n, 3)))
    chord_dir = chord / length
    d0 = unit(start_direction)
    if np.linalg.norm(d0) < 0.5:  # still hand: leave along the chord
        d0 = chord_dir
    d1 = unit(end.direction)
    theta = _angles_to_chord(d0, chord_dir)
    phi = _angles_to_chord(d1, chord_dir)
    c1 = p0 + (_hobby_rho(theta, phi) / 3.0) * length * d0
    c2 = p3 - (_hobby_rho(phi, theta) / 3.0) * length * d1
    t = (np.arange(n) / (n - 1))[:, None]
    omt = 1.0 - t
    means = omt**3 * p0 + 3.0 * omt**2 * t * c1 + 3.0 * omt * t**2 * c2 + t**3 * p3
    velocities = 3.0 * omt**2 * (c1 - p0) + 6.0 * omt * t * (c2 - c1) + 3.0 * t**2 * (p3 - c2)
    return GaussianPath(means=means, covs=covs, velocities=velocities)


def predict_hand_path(
    hand: HandState, n: int = 8, cfg: TpaConfig = TpaConfig()
) -> GaussianPath:
    """Constant-velocity extrapolation with per-step uncertainty growth."""
    tau = cfg.horizon_s / (n - 1)
    j = np.arange(n)
    means = hand.position[None, :] + hand.velocity[None, :] * (j * tau)[:, None]
    scale = cfg.pred_sigma0_m**2 + j * cfg.pred_step_sigma_m**2
    covs = scale[:, None, None] * np.eye(3)[None, :, :]
    velocities = np.tile(hand.velocity, (n, 1))
    return GaussianPath(means=means, covs=covs, velocities=velocities)


def bhattacharyya(mu1, S1, mu2, S2) -> float:
    """Bhattacharyya distance between two Gaussians (closed form)."""
    mu1 = np.asarray(mu1, dtype=float).ravel()
    mu2 = np.asarray(mu2, dtype=float).ravel()
    S1 = np.atleast_2d(np.asarray(S1, dtype=float))
    S2 = np.atleast_2d(np.asarray(S2, dtype=float))
    logdets = []
    for name, S in (("S1", S1), ("S2", S2)):
        if not np.allclose(S, S.T, atol=1e-9):
            raise ValueError(f"{name} must be symmetric")
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as e:
            raise ValueError(f"{name} must be positive-definite") from e
        logdets.append(2.0 * np.sum(np.log(np.diag(L))))
    sbar = 0.5 * (S1 + S2)
    try:
        Lbar = np.linalg.cholesky(sbar)
    except np.linalg.LinAlgError as e:  # cannot happen for PD inputs
        raise ValueError("mean covariance must be positive-definite") from e
    logdet_bar = 2.0 * np.sum(np.log(np.diag(Lbar)))
    diff = mu2 - mu1
    y = np.linalg.solve(sbar, diff)
    return float(0.125 * diff @ y + 0.5 * (logdet_bar - 0.5 * (logdets[0] + logdets[1])))


def _direction_weight(v1: np.ndarray, v2: np.ndarray) -> float:
    """Weight (2 - cos angle)/2 in [0.5, 1.5]; 1 when a velocity vanishes."""
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 < _EPS or n2 < _EPS:
        return 1.0
    c = float(np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0))
    return (2.0 - c) / 2.0


def path_distance(pred: GaussianPath, cand: GaussianPath) -> float:
    """Velocity-weighted sum of pointwise Bhattacharyya distances."""
    if pred.n_points != cand.n_points:
        raise ValueError("paths must have the same number of points")
    total = 0.0
    for j in range(pred.n_points):
        w = _direction_weight(pred.velocities[j], cand.velocities[j])
        total += w * bhattacharyya(pred.means[j], pred.covs[j], cand.means[j], cand.covs[j])
    return total


# ---------------------------------------------------------------------------
# Vectorized all-candidates scoring


def _candidate_objects(scene: Scene, other_hand: HandState, other_hand_id: str) -> list[SceneObject]:
    objs = [o for o in scene.objects if o.kind in (ObjectKind.CYLINDER, ObjectKind.COASTER)]
    objs.append(
        SceneObject(
            id=other_hand_id,
            kind=ObjectKind.GRIPPER,
            pose=Pose(position=other_hand.position, orientation=other_hand.orientation),
            geometry=BoxGeom(GRIPPER_EXTENTS),
        )
    )
    return objs


def candidate_geometry(
    scene: Scene, other_hand: HandState, other_hand_id: str
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """(ids, centers, tops) arrays for the 12 objects + the other hand."""
    objs = _candidate_objects(scene, other_hand, other_hand_id)
    ids = [o.id for o in objs]
    centers = np.array([o.center for o in objs])
    tops = np.array([o.top for o in objs])
    return ids, centers, tops


try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@_njit(cache=True)
def _tpa_z_kernel(
    locs, dirs, n_ap, p0, v, speed, bez, dbez, eight_s_bar, log_term, pred_steps
):  # pragma: no cover - exercised via tpa_z_from_arrays
    sqrt5 = 2.23606797749979
    sqrt2 = 1.4142135623730951
    m = locs.shape[0]
    n = bez.shape[1]
    z_ap = np.empty(m)
    for a in range(m):
        cx = locs[a, 0] - p0[0]
        cy = locs[a, 1] - p0[1]
        cz = locs[a, 2] - p0[2]
        length = np.sqrt(cx * cx + cy * cy + cz * cz)
        degenerate = length < 1e-12
        if degenerate:
            chx, chy, chz = 1.0, 0.0, 0.0
        else:
            chx, chy, chz = cx / length, cy / length, cz / length
        if speed > 1e-12:
            d0x, d0y, d0z = v[0] / speed, v[1] / speed, v[2] / speed
        else:
            d0x, d0y, d0z = chx, chy, chz
        c = d0x * chx + d0y * chy + d0z * chz
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        theta = np.arccos(c)
        c = dirs[a, 0] * chx + dirs[a, 1] * chy + dirs[a, 2] * chz
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        phi = np.arccos(c)
        st, sp = np.sin(theta), np.sin(phi)
        ct, cp = np.cos(theta), np.cos(phi)
        prod = sqrt2 * (st - sp / 16.0) * (sp - st / 16.0)
        rho = (2.0 + prod * (ct - cp)) / (
            1.0 + 0.5 * (sqrt5 - 1.0) * ct + 0.5 * (3.0 - sqrt5) * cp
        )
        sigma = (2.0 + prod * (cp - ct)) / (
            1.0 + 0.5 * (sqrt5 - 1.0) * cp + 0.5 * (3.0 - sqrt5) * ct
        )
        c1x = p0[0] + rho / 3.0 * length * d0x
        c1y = p0[1] + rho / 3.0 * length * d0y
        c1z = p0[2] + rho / 3.0 * length * d0z
        c2x = locs[a, 0] - sigma / 3.0 * length * dirs[a, 0]
        c2y = locs[a, 1] - sigma / 3.0 * length * dirs[a, 1]
        c2z = locs[a, 2] - sigma / 3.0 * length * dirs[a, 2]
        total = 0.0
        for j in range(n):
            if degenerate:
                mx, my, mz = p0[0], p0[1], p0[2]
                vx, vy, vz = 0.0, 0.0, 0.0
            else:
                b0, b1, b2, b3 = bez[0, j], bez[1, j], bez[2, j], bez[3, j]
                mx = b0 * p0[0] + b1 * c1x + b2 * c2x + b3 * locs[a, 0]
                my = b0 * p0[1] + b1 * c1y + b2 * c2y + b3 * locs[a, 1]
                mz = b0 * p0[2] + b1 * c1z + b2 * c2z + b3 * locs[a, 2]
                d0_, d1_, d2_ = dbez[0, j], dbez[1, j], dbez[2, j]
                vx = d0_ * (c1x - p0[0]) + d1_ * (c2x - c1x) + d2_ * (locs[a, 0] - c2x)
                vy = d0_ * (c1y - p0[1]) + d1_ * (c2y - c1y) + d2_ * (locs[a, 1] - c2y)
                vz = d0_ * (c1z - p0[2]) + d1_ * (c2z - c1z) + d2_ * (locs[a, 2] - c2z)
            px = p0[0] + v[0] * pred_steps[j] - mx
            py = p0[1] + v[1] * pred_steps[j] - my
            pz = p0[2] + v[2] * pred_steps[j] - mz
            db = (px * px + py * py + pz * pz) / eight_s_bar[j] + log_term[j]
            if speed < 1e-12:
                w = 1.0
            else:
                vel_norm = np.sqrt(vx * vx + vy * vy + vz * vz)
                if vel_norm < 1e-12:
                    w = 1.0
                else:
                    cosang = (vx * v[0] + vy * v[1] + vz * v[2]) / (vel_norm * speed)
                    if cosang > 1.0:
                        cosang = 1.0
                    elif cosang < -1.0:
                        cosang = -1.0
                    w = (2.0 - cosang) / 2.0
            total += w * db
        z_ap[a] = total
    n_cand = m // n_ap
    z = np.empty(n_cand)
    for k in range(n_cand):
        best = z_ap[k * n_ap]
        for a in range(k * n_ap + 1, (k + 1) * n_ap):
            if z_ap[a] < best:
                best = z_ap[a]
        z[k] = best
    return z


_TPA_CONST_CACHE: dict[TpaConfig, tuple] = {}


def _tpa_constants(cfg: TpaConfig):
    """Per-config sample times, Bezier basis rows, and covariance terms."""
    cached = _TPA_CONST_CACHE.get(cfg)
    if cached is not None:
        return cached
    n = cfg.n_points
    t = np.arange(n) / (n - 1)
    omt = 1.0 - t
    bez = (omt**3, 3.0 * omt**2 * t, 3.0 * omt * t**2, t**3)
    dbez = (3.0 * omt**2, 6.0 * omt * t, 3.0 * t**2)
    j = np.arange(n, dtype=float)
    s_pred = cfg.pred_sigma0_m**2 + j * cfg.pred_step_sigma_m**2
    s_cand = cfg.path_sigma_m**2 * (1.0 + cfg.path_back_growth * (n - 1 - j))
    s_bar = 0.5 * (s_pred + s_cand)
    log_term = 1.5 * np.log(s_bar / np.sqrt(s_pred * s_cand))
    pred_steps = j * cfg.horizon_s / (n - 1)
    _TPA_CONST_CACHE[cfg] = (
        bez,
        dbez,
        8.0 * s_bar,
        log_term,
        pred_steps,
        np.stack(bez),
        np.stack(dbez),
    )
    return _TPA_CONST_CACHE[cfg]


def tpa_z_from_arrays(
    centers: np.ndarray,
    tops: np.ndarray,
    hand_position: np.ndarray,
    hand_velocity: np.ndarray,
    cfg: TpaConfig = TpaConfig(),
) -> np.ndarray:
    """Per-candidate minimum path distances, vectorized over candidates.

    Equivalent to looping hobby_path/path_distance over every approach
    point (the covariances are isotropic by construction, which collapses
    the Bhattacharyya terms to scalars).
    """
    n = cfg.n_points
    n_cand = len(centers)
    p0 = np.asarray(hand_position, dtype=float)
    v = np.asarray(hand_velocity, dtype=float)
    planar = np.array([v[0], v[1], 0.0])
    include_xy = np.linalg.norm(planar) >= cfg.v_eps
    n_ap = 3 if include_xy else 2

    line = centers - p0[None, :]
    line_len = np.linalg.norm(line, axis=1)
    line_dir = np.where(
        (line_len > _EPS)[:, None],
        line / np.where(line_len < _EPS, 1.0, line_len)[:, None],
        np.array([0.0, 0.0, -1.0])[None, :],
    )
    locs = np.empty((n_cand, n_ap, 3))
    dirs = np.empty((n_cand, n_ap, 3))
    locs[:, 0] = tops
    dirs[:, 0] = np.array([0.0, 0.0, -1.0])
    if include_xy:
        locs[:, 1] = centers
        dirs[:, 1] = unit(planar)
    locs[:, -1] = centers
    dirs[:, -1] = line_dir
    locs = locs.reshape(-1, 3)
    dirs = dirs.reshape(-1, 3)
    m = len(locs)
    speed = float(np.linalg.norm(v))
    consts = _tpa_constants(cfg)
    if _HAVE_NUMBA:
        _, _, eight_s_bar, log_term, pred_steps, bez_stack, dbez_stack = consts
        return _tpa_z_kernel(
            locs, dirs, n_ap, p0, v, speed, bez_stack, dbez_stack,
            eight_s_bar, log_term, pred_steps,
        )
    chord = locs - p0[None, :]
    length = np.linalg.norm(chord, axis=1)
    safe_len = np.where(length < _EPS, 1.0, length)
    chord_dir = chord / safe_len[:, None]
    d0 = np.where(speed > _EPS, np.tile(v / max(speed, _EPS), (m, 1)), chord_dir)
    theta = _angles_to_chord(d0, chord_dir)
    phi = _angles_to_chord(dirs, chord_dir)
    c1 = p0[None, :] + (_hobby_rho(theta, phi) / 3.0 * length)[:, None] * d0
    c2 = locs - (_hobby_rho(phi, theta) / 3.0 * length)[:, None] * dirs

    (b0, b1, b2, b3), (db0, db1, db2), eight_s_bar, log_term, pred_steps, _, _ = consts
    b0 = b0[None, :, None]
    b1 = b1[None, :, None]
    b2 = b2[None, :, None]
    b3 = b3[None, :, None]
    means = b0 * p0[None, None, :] + b1 * c1[:, None, :] + b2 * c2[:, None, :] + b3 * locs[:, None, :]
    vels = (
        db0[None, :, None] * (c1 - p0)[:, None, :]
        + db1[None, :, None] * (c2 - c1)[:, None, :]
        + db2[None, :, None] * (locs - c2)[:, None, :]
    )
    degenerate = length < _EPS
    if degenerate.any():
        means[degenerate] = p0[None, None, :]
        vels[degenerate] = 0.0

    pred_means = p0[None, :] + v[None, :] * pred_steps[:, None]
    diff = means - pred_means[None, :, :]
    d2 = np.einsum("mjk,mjk->mj", diff, diff)
    db = d2 / eight_s_bar[None, :] + log_term[None, :]

    if speed < _EPS:
        w = np.ones((m, n))
    else:
        vel_norm = np.linalg.norm(vels, axis=2)
        cosang = np.einsum("mjk,k->mj", vels, v) / (np.where(vel_norm < _EPS, 1.0, vel_norm) * speed)
        w = np.where(vel_norm < _EPS, 1.0, (2.0 - np.clip(cosang, -1.0, 1.0)) / 2.0)

    z_ap = np.sum(w * db, axis=1)
    return z_ap.reshape(n_cand, n_ap).min(axis=1)


def tpa_z_values(
    scene: Scene,
    hand: HandState,
    other_hand: HandState,
    other_hand_id: str,
    cfg: TpaConfig = TpaConfig(),
) -> tuple[list[str], np.ndarray]:
    ids, centers, tops = candidate_geometry(scene, other_hand, other_hand_id)
    return ids, tpa_z_from_arrays(centers, tops, hand.position, hand.velocity, cfg)


def softmax_neg(z: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(-z / T), stabilized by shifting the minimum to zero."""
    e = np.exp(-(z - z.min()) / temperature)
    return e / e.sum()


def place_adjusted_z(z: np.ndarray, held_index: int, factor: float = 1.05) -> np.ndarray:
    """Push the held object's path distance just past the farthest
    candidate before the softmax.

    While an object is carried it sits at the hand, so its raw distance
    is always the minimum and the low-temperature softmax would hand it
    all the mass; deprioritizing it up front lets the actual place
    target's likelihood rise as the hand approaches.
    """
    out = np.asarray(z, dtype=float).copy()
    others = np.delete(out, held_index)
    if len(others):
        out[held_index] = factor * others.max()
    return out


def tpa_vector(
    scene: Scene,
    hand: HandState,
    other_hand: HandState,
    other_hand_id: str,
    cfg: TpaConfig = TpaConfig(),
) -> dict[str, float]:
    """Softmax target likelihoods over the 12 objects plus the other hand."""
    ids, z = tpa_z_values(scene, hand, other_hand, other_hand_id, cfg)
    probs = softmax_neg(z, cfg.softmax_temperature)
    return dict(zip(ids, probs.tolist()))


def tpa_debug_payload(
    scene: Scene,
    hand: HandState,
    other_hand: HandState,
    other_hand_id: str,
    cfg: TpaConfig = TpaConfig(),
) -> dict:
    """Candidate polylines and scores for trajectory overlays / logging."""
    objs = _candidate_objects(scene, other_hand, other_hand_id)
    start_dir = hand.velocity
    entries = []
    ids, z = tpa_z_values(scene, hand, other_hand, other_hand_id, cfg)
    probs = softmax_neg(z, cfg.softmax_temperature)
    pred = predict_hand_path(hand, cfg.n_points, cfg)
    for obj, zi, pi in zip(objs, z, probs):
        best = None
        for ap in approach_points(obj, hand, cfg):
            path = hobby_path(hand.position, start_dir, ap, cfg.n_points, cfg)
            d = path_distance(pred, path)
            if best is None or d < best[0]:
                best = (d, ap, path)
        _, ap, path = best
        entries.append(
            {
                "id": obj.id,
                "z": float(zi),
                "likelihood": float(pi),
                "approach": ap.kind.value,
                "polyline": path.means.tolist(),
            }
        )
    return {"predicted": pred.means.tolist(), "candidates": entries}
