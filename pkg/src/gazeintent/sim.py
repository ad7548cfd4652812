"""Synthetic eye-hand-coordination trials.

Hands follow minimum-jerk point-to-point reaches; gaze jumps between
fixation targets (optional glances at cylinders neighboring the pick
target, target fixation leading the grasp by ~0.5 s, and the
held-object / place-target / held-object pattern during transport) with
isotropic angular noise. Handover trials overlap the two grasp phases at
a meeting point between the hands. Everything is deterministic given the
seeds; none of the behavioral regularities are claimed to match human
data beyond the timing anchors they were built from.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import unit
from .scene import (
    Action,
    CYLINDER_HEIGHT,
    CYLINDER_RADIUS,
    FAR_ROW_Y,
    GRIPPER_EXTENTS,
    Frame,
    GRIP_CLEARANCE,
    HAND_REST,
    Hand,
    HandState,
    IntentLabel,
    PhaseSegment,
    Scene,
    Sequence,
)


class TrialMode(enum.Enum):
    RIGHT_ONLY = "right_only"
    LEFT_ONLY = "left_only"
    HANDOVER_RL = "handover_rl"  # pick with the right, place with the left
    HANDOVER_LR = "handover_lr"

    @property
    def pick_hand(self) -> Hand:
        return Hand.LEFT if self in (TrialMode.LEFT_ONLY, TrialMode.HANDOVER_LR) else Hand.RIGHT

    @property
    def place_hand(self) -> Hand:
        if self is TrialMode.HANDOVER_RL:
            return Hand.LEFT
        if self is TrialMode.HANDOVER_LR:
            return Hand.RIGHT
        return self.pick_hand

    @property
    def is_handover(self) -> bool:
        return self in (TrialMode.HANDOVER_RL, TrialMode.HANDOVER_LR)


ALL_MODES = tuple(TrialMode)
GRIPPER_SIDE = GRIPPER_EXTENTS[0]


@dataclass
class UserProfile:
    reach_peak_speed: float = 1.2  # m/s cap; reaches are slowed to respect it
    eye_lead_s: float = 0.5  # gaze settles on the target this long before the grasp
    distractor_glance_prob: float = 0.6
    gaze_noise_deg: float = 0.8
    pick_duration_s: tuple[float, float] = (1.1, 1.5)
    place_duration_s: tuple[float, float] = (2.2, 2.6)
    seed: int = 0

    def __post_init__(self):
        if self.pick_duration_s[0] <= 0 or self.place_duration_s[0] <= 0:
            raise ValueError("durations must be positive")
        if not 0.0 <= self.distractor_glance_prob <= 1.0:
            raise ValueError("glance probability must be in [0, 1]")


@dataclass(frozen=True)
class TrialSpec:
    pick_target: str
    place_target: str
    mode: TrialMode = TrialMode.RIGHT_ONLY

    def __post_init__(self):
        if not self.pick_target.startswith("a"):
            raise ValueError(f"pick target must be a cylinder, got {self.pick_target!r}")
        if not self.place_target.startswith("b"):
            raise ValueError(f"place target must be a coaster, got {self.place_target!r}")


@dataclass
class ProfileRanges:
    """Per-user draws. The eye lead stays at or above the window length
    (every user fixates the target through at least one full window) and
    the gaze noise stays within the tracker-accuracy band."""

    reach_peak_speed: tuple[float, float] = (1.0, 1.4)
    eye_lead_s: tuple[float, float] = (0.5, 0.62)
    distractor_glance_prob: tuple[float, float] = (0.4, 0.8)
    gaze_noise_deg: tuple[float, float] = (0.5, 0.85)
    pick_duration_s: tuple[float, float] = (1.1, 1.5)
    place_duration_s: tuple[float, float] = (2.2, 2.6)

    def draw(self, rng: np.random.Generator, seed: int) -> UserProfile:
        return UserProfile(
            reach_peak_speed=float(rng.uniform(*self.reach_peak_speed)),
            eye_lead_s=float(rng.uniform(*self.eye_lead_s)),
            distractor_glance_prob=float(rng.uniform(*self.distractor_glance_prob)),
            gaze_noise_deg=float(rng.uniform(*self.gaze_noise_deg)),
            pick_duration_s=self.pick_duration_s,
            place_duration_s=self.place_duration_s,
            seed=seed,
        )


# ---------------------------------------------------------------------------
# Motion primitives


def min_jerk(p0, p1, duration: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-jerk positions and velocities at times t in [0, duration]."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = np.clip(np.asarray(t, dtype=float) / duration, 0.0, 1.0)
    blend = 10 * s**3 - 15 * s**4 + 6 * s**5
    dblend = (30 * s**2 - 60 * s**3 + 30 * s**4) / duration
    delta = p1 - p0
    pos = p0[None, :] + blend[:, None] * delta[None, :]
    vel = dblend[:, None] * delta[None, :]
    return pos, vel


@dataclass
class _Program:
    """Piecewise minimum-jerk schedule for one hand.

    Reaches may arc: a vertical lift proportional to sin(pi * progress)
    rides on the straight minimum-jerk path, so grasps finish descending
    onto the target instead of driving through it.
    """

    segments: list = field(default_factory=list)  # (t0, t1, p0, p1, arc)

    def hold(self, t0: float, t1: float, p) -> None:
        self.segments.append((t0, t1, np.asarray(p, dtype=float), np.asarray(p, dtype=float), 0.0))

    def move(self, t0: float, t1: float, p0, p1, arc: float = 0.0) -> None:
        self.segments.append(
            (t0, t1, np.asarray(p0, dtype=float), np.asarray(p1, dtype=float), arc)
        )

    @property
    def end_position(self) -> np.ndarray:
        return self.segments[-1][3]

    def sample(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pos = np.empty((len(times), 3))
        vel = np.zeros((len(times), 3))
        for t0, t1, p0, p1, arc in self.segments:
            m = (times >= t0) & (times < t1)
            if not m.any():
                continue
            duration = max(t1 - t0, 1e-9)
            p, v = min_jerk(p0, p1, duration, times[m] - t0)
            if arc:
                s = np.clip((times[m] - t0) / duration, 0.0, 1.0)
                blend = 10 * s**3 - 15 * s**4 + 6 * s**5
                dblend = (30 * s**2 - 60 * s**3 + 30 * s**4) / duration
                p[:, 2] += arc * np.sin(np.pi * blend)
                v[:, 2] += arc * np.pi * np.cos(np.pi * blend) * dblend
            pos[m] = p
            vel[m] = v
        after = times >= self.segments[-1][1]
        pos[after] = self.segments[-1][3]
        return pos, vel


def _grasp_point(scene: Scene, object_id: str) -> np.ndarray:
    return scene.object(object_id).top + np.array([0.0, 0.0, GRIP_CLEARANCE])


def _look_point(scene: Scene, object_id: str) -> np.ndarray:
    """Center of the part the user actually sees from the viewpoint."""
    obj = scene.object(object_id)
    if object_id.startswith("a"):
        # far-row cylinders are visible only above half height; aiming
        # lower would drop most gaze mass onto the near-row occluder
        frac = 0.75 if obj.pose.position[1] >= FAR_ROW_Y - 1e-9 else 0.6
        return obj.pose.position + np.array([0.0, 0.0, frac * CYLINDER_HEIGHT])
    return obj.center


def _neighbors(scene: Scene, pick_target: str, max_n: int = 2) -> list[str]:
    p = scene.object(pick_target).pose.position
    others = [
        (float(np.linalg.norm(scene.object(a).pose.position - p)), a)
        for a in scene.pick_ids
        if a != pick_target
    ]
    others.sort()
    return [a for d, a in others if d <= 0.19][:max_n]


def _held_center(hand_pos: np.ndarray) -> np.ndarray:
    """Center of a held cylinder given the holding hand position."""
    return hand_pos - np.array([0.0, 0.0, GRIP_CLEARANCE + CYLINDER_HEIGHT / 2.0])


def _held_look(hand_pos: np.ndarray) -> np.ndarray:
    """Fixation point on a held cylinder: its upper body, like the look
    points used for cylinders on the table (also keeps the gaze ray clear
    of the rows behind a carried object)."""
    return _held_center(hand_pos) + np.array([0.0, 0.0, 0.4 * CYLINDER_HEIGHT])


# ---------------------------------------------------------------------------
# Trial synthesis


def simulate_trial(
    scene: Scene,
    spec: TrialSpec,
    profile: UserProfile,
    rate_hz: float = 120.0,
    user_id: int = 0,
    trial: int = 0,
    block: Optional[str] = None,
) -> Sequence:
    """One labeled trial; deterministic given the profile seed and indices.

    The returned sequence spans the whole trial; its phase segments carry
    the per-phase ground truth (pick, optional transfer, place) and its
    own label is the pick phase's.
    """
    rng = np.random.default_rng([profile.seed, user_id, trial, 7])
    pick_hand = spec.mode.pick_hand
    place_hand = spec.mode.place_hand
    dt = 1.0 / rate_hz

    grasp = _grasp_point(scene, spec.pick_target)
    place_obj = scene.object(spec.place_target)
    place_hand_pt = place_obj.pose.position + np.array(
        [0.0, 0.0, CYLINDER_HEIGHT + GRIP_CLEARANCE]
    )
    hover_pt = place_hand_pt + np.array([0.0, 0.0, 0.06])

    rest = {h: HAND_REST[h.object_id].copy() for h in Hand}
    programs = {h: _Program() for h in Hand}
    t_idle = float(rng.uniform(0.10, 0.20))
    pick_dur = float(rng.uniform(*profile.pick_duration_s))
    reach_time = pick_dur - t_idle
    dist = float(np.linalg.norm(grasp - rest[pick_hand]))
    # minimum-jerk peak speed is 1.875 d/T; stretch the reach if too fast
    min_time = 1.875 * dist / profile.reach_peak_speed
    if reach_time < min_time:
        pick_dur = t_idle + min_time
        reach_time = min_time
    t_press = pick_dur

    prog = programs[pick_hand]
    prog.hold(0.0, t_idle, rest[pick_hand])
    prog.move(t_idle, t_press, rest[pick_hand], grasp, arc=0.07)

    gaze_events: list[tuple[float, object]] = [(0.0, ("object", spec.pick_target))]
    t_fix = t_press - profile.eye_lead_s
    t_cursor = float(rng.uniform(0.12, 0.22))
    for neighbor in _neighbors(scene, spec.pick_target):
        if rng.uniform() > profile.distractor_glance_prob:
            continue
        dur = float(rng.uniform(0.15, 0.30))
        if t_cursor + dur > t_fix - 0.05:
            break
        gaze_events.append((t_cursor, ("object", neighbor)))
        t_cursor += dur
    gaze_events.append((t_cursor, ("object", spec.pick_target)))
    gaze_events.append((t_fix, ("object", spec.pick_target)))

    place_dur = float(rng.uniform(*profile.place_duration_s))
    triggers: dict[Hand, list[tuple[float, float]]] = {h: [] for h in Hand}

    if not spec.mode.is_handover:
        t_release = t_press + place_dur
        settle1 = 0.05 * place_dur
        transport = 0.55 * place_dur
        lower = 0.25 * place_dur
        t0 = t_press + settle1
        prog.hold(t_press, t0, grasp)
        prog.move(t0, t0 + transport, grasp, hover_pt)
        prog.move(t0 + transport, t0 + transport + lower, hover_pt, place_hand_pt)
        prog.hold(t0 + transport + lower, t_release + 0.1, place_hand_pt)
        triggers[pick_hand].append((t_press, t_release))
        held_spans = {pick_hand: [(t_press, t_release, spec.pick_target)]}
        other = pick_hand.other
        programs[other].hold(0.0, t_release + 0.1, rest[other])

        hold_back = min(0.35, 0.3 * place_dur)
        gaze_events.append((t_press, ("held", pick_hand)))
        gaze_events.append((t0 + 0.35 * transport, ("object", spec.place_target)))
        gaze_events.append((t_release - hold_back, ("held", pick_hand)))
        t_end = t_release + 0.05
        phases = (
            PhaseSegment("pick", pick_hand, IntentLabel(Action.PICK, spec.pick_target, pick_hand), 0, 0),
            PhaseSegment("place", place_hand, IntentLabel(Action.PLACE, spec.place_target, place_hand), 0, 0),
        )
        phase_times = [(0.0, t_press), (t_press, t_release)]
    else:
        receiver = place_hand
        # meeting point toward the receiving side, close to the user and
        # low: the receive then looks like an ordinary flat table reach
        side = -0.14 if receiver is Hand.LEFT else 0.14
        meet_center = np.array([side, 0.20, 0.25])  # carried object's center
        meet_hand = meet_center + np.array([0.0, 0.0, CYLINDER_HEIGHT / 2.0 + GRIP_CLEARANCE])
        # the receiver grips the body from its side while the giver still
        # pinches the top, so the hands never collide
        lateral = -1.0 if receiver is Hand.LEFT else 1.0
        side_grip = meet_center + np.array(
            [lateral * (CYLINDER_RADIUS + GRIPPER_SIDE / 2.0), 0.0, 0.0]
        )
        carry = float(rng.uniform(0.7, 0.9))
        t_carry0 = t_press + 0.05
        t_meet = t_carry0 + carry
        prog.hold(t_press, t_carry0, grasp)
        prog.move(t_carry0, t_meet, grasp, meet_hand, arc=0.05)
        # the receiver reaches only once the carried object is parked, so
        # its reach targets a static object like any table pick
        receive = float(rng.uniform(0.5, 0.6))
        hover = 0.30  # receiver parked at the body before gripping
        t_grab = t_meet + receive
        t2 = t_grab + hover  # receiver presses
        t3 = t2 + 0.15  # picker releases; grasp overlap
        prog.hold(t_meet, t3 + 0.05, meet_hand)
        prog.move(t3 + 0.05, t3 + 0.55, meet_hand, rest[pick_hand])

        rprog = programs[receiver]
        r_start = t_meet
        rprog.hold(0.0, r_start, rest[receiver])
        rprog.move(r_start, t_grab, rest[receiver], side_grip, arc=0.03)
        t4 = t2 + place_dur
        settle1 = (t3 - t2) + 0.05
        transport = 0.55 * (place_dur - settle1)
        lower = 0.25 * (place_dur - settle1)
        r0 = t2 + settle1
        rprog.hold(t_grab, r0, side_grip)
        rprog.move(r0, r0 + transport, side_grip, hover_pt)
        rprog.move(r0 + transport, r0 + transport + lower, hover_pt, place_hand_pt)
        rprog.hold(r0 + transport + lower, t4 + 0.1, place_hand_pt)

        triggers[pick_hand].append((t_press, t3))
        triggers[receiver].append((t2, t4))
        held_spans = {
            pick_hand: [(t_press, t3, spec.pick_target)],
            receiver: [(t2, t4, spec.pick_target)],
        }

        gaze_events.append((t_press, ("held", pick_hand)))
        # anticipatory look at the exchange region, aimed high so the
        # ray clears the cylinder rows behind it
        gaze_events.append((t_carry0 + 0.4 * carry, ("point", meet_center + np.array([0.0, 0.0, 0.1]))))
        # during the exchange the gaze alternates between the carried
        # object and the incoming hand, like checking held object and
        # place target during an ordinary transport
        t_cursor2 = t_meet - 0.35
        look_hand = True
        while t_cursor2 < t3:
            target = ("hand", receiver) if look_hand else ("held", pick_hand)
            gaze_events.append((t_cursor2, target))
            t_cursor2 += float(rng.uniform(0.18, 0.28))
            look_hand = not look_hand
        gaze_events.append((t3, ("held", receiver)))
        gaze_events.append((r0 + 0.35 * transport, ("object", spec.place_target)))
        hold_back = min(0.35, 0.3 * place_dur)
        gaze_events.append((t4 - hold_back, ("held", receiver)))
        t_end = t4 + 0.05
        phases = (
            PhaseSegment("pick", pick_hand, IntentLabel(Action.PICK, spec.pick_target, pick_hand), 0, 0),
            PhaseSegment("transfer", pick_hand, None, 0, 0),
            PhaseSegment("place", receiver, IntentLabel(Action.PLACE, spec.place_target, receiver), 0, 0),
        )
        # the transfer segment is the exchange itself: object presented,
        # receiving hand reaching in, grip handed over. The preceding
        # carry is ordinary transport.
        phase_times = [(0.0, t_press), (t_meet - 0.15, t3), (t2, t4)]

    n_frames = int(np.floor(t_end * rate_hz)) + 1
    times = np.arange(n_frames) * dt
    pos = {}
    vel = {}
    for h in Hand:
        pos[h], vel[h] = programs[h].sample(times)

    trig = {h: np.zeros(n_frames, dtype=bool) for h in Hand}
    held: dict[Hand, list] = {h: [None] * n_frames for h in Hand}
    for h in Hand:
        for (ta, tb) in triggers[h]:
            trig[h][(times >= ta) & (times < tb)] = True
        for (ta, tb, oid) in held_spans.get(h, []):
            for i in np.nonzero((times >= ta) & (times < tb))[0]:
                held[h][i] = oid

    eye = scene.viewpoint.position
    starts = np.array([ev[0] for ev in gaze_events])
    order = np.argsort(starts, kind="stable")
    starts = starts[order]
    events = [gaze_events[i] for i in order]
    ev_idx = np.searchsorted(starts, times, side="right") - 1
    ev_idx = np.clip(ev_idx, 0, len(events) - 1)

    sigma = np.deg2rad(profile.gaze_noise_deg)
    noise = rng.normal(0.0, sigma, size=(n_frames, 2))
    frames = []
    for i, t in enumerate(times):
        kind, arg = events[ev_idx[i]][1]
        if kind == "object":
            point = _look_point(scene, arg)
        elif kind == "point":
            point = arg
        elif kind == "hand":
            point = pos[arg][i]
        else:  # held object carried by a hand
            point = _held_look(pos[arg][i])
        d = unit(point - eye)
        # small-angle angular perturbation in an orthonormal frame around d
        ux = np.cross(d, [0.0, 0.0, 1.0])
        ux = unit(ux) if np.linalg.norm(ux) > 1e-9 else np.array([1.0, 0.0, 0.0])
        uy = np.cross(ux, d)
        d = unit(d + np.tan(noise[i, 0]) * ux + np.tan(noise[i, 1]) * uy)
        frames.append(
            Frame(
                t=float(t),
                gaze_dir=d,
                left=HandState(
                    position=pos[Hand.LEFT][i],
                    velocity=vel[Hand.LEFT][i],
                    trigger=bool(trig[Hand.LEFT][i]),
                    held_object=held[Hand.LEFT][i],
                ),
                right=HandState(
                    position=pos[Hand.RIGHT][i],
                    velocity=vel[Hand.RIGHT][i],
                    trigger=bool(trig[Hand.RIGHT][i]),
                    held_object=held[Hand.RIGHT][i],
                ),
            )
        )

    def frame_index(t: float) -> int:
        return int(np.searchsorted(times, t - 1e-9))

    phases = tuple(
        PhaseSegment(p.name, p.hand, p.label, frame_index(ta), frame_index(tb))
        for p, (ta, tb) in zip(phases, phase_times)
    )
    return Sequence(
        frames=tuple(frames),
        label=phases[0].label,
        user_id=user_id,
        block=block if block is not None else spec.mode.value,
        trial=trial,
        phases=phases,
    )


def generate_dataset(
    scene: Scene,
    n_users: int = 10,
    modes: tuple[TrialMode, ...] = ALL_MODES,
    trials_per_block: int = 36,
    master_seed: int = 0,
    rate_hz: float = 120.0,
    profile_ranges: Optional[ProfileRanges] = None,
) -> list[Sequence]:
    """Full experiment: per user, one block per mode, every pick x place
    combination per block (shuffled), independent seeded profiles."""
    ranges = profile_ranges or ProfileRanges()
    sequences: list[Sequence] = []
    pick_ids = scene.pick_ids
    place_ids = scene.place_ids
    combos = [(a, b) for a in pick_ids for b in place_ids]
    for user in range(n_users):
        user_rng = np.random.default_rng([master_seed, user])
        profile = ranges.draw(user_rng, seed=master_seed * 100003 + user)
        for mode in modes:
            mode_tag = zlib.crc32(mode.value.encode())
            block_rng = np.random.default_rng([master_seed, user, mode_tag])
            order = block_rng.permutation(len(combos))
            picks = [combos[i] for i in order]
            for k in range(trials_per_block):
                a, b = picks[k % len(picks)]
                spec = TrialSpec(pick_target=a, place_target=b, mode=mode)
                sequences.append(
                    simulate_trial(
                        scene,
                        spec,
                        profile,
                        rate_hz=rate_hz,
                        user_id=user,
                        trial=k,
                        block=mode.value,
                    )
                )
    return sequences
