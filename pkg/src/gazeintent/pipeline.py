"""Per-frame raw feature extraction for frame streams.

Wires the gaze likelihood (shared across hands) and per-hand target-path
likelihoods together while tracking moving grippers and held objects.
Equivalent to calling aoi_likelihoods / tpa_vector on
``scene_for_frame(scene, frame)`` for every frame, but mutates a compiled
primitive copy in place instead of rebuilding the scene.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aoi import (
    AoiConfig,
    ScenePrimitives,
    cast_depth,
    masses_from_cast,
    normalize_masses,
    window_basis_from_axes,
)
from .features import RawFeatureStream
from .scene import (
    BoxGeom,
    CylinderGeom,
    Frame,
    GRIP_CLEARANCE,
    Hand,
    ObjectKind,
    Scene,
    Sequence,
)
from .tpa import TpaConfig, place_adjusted_z, softmax_neg, tpa_z_from_arrays


@dataclass
class SequenceFeatures:
    """Raw features for one sequence: shared gaze, per-hand motion."""

    times: np.ndarray
    aoi_ids: tuple[str, ...]
    aoi: np.ndarray  # (T, n_aoi)
    tpa_ids: dict[Hand, tuple[str, ...]]
    tpa: dict[Hand, np.ndarray]  # (T, n_tpa); zero rows outside computed spans
    grasp: dict[Hand, np.ndarray]
    held: dict[Hand, tuple[Optional[str], ...]]
    tpa_place: dict[Hand, np.ndarray] = None  # held-deprioritized variant

    def stream(self, hand: Hand) -> RawFeatureStream:
        return RawFeatureStream(
            times=self.times,
            aoi_ids=self.aoi_ids,
            aoi=self.aoi,
            tpa_ids=self.tpa_ids[hand],
            tpa=self.tpa[hand],
            grasp=self.grasp[hand],
            held=self.held[hand],
            tpa_place=None if self.tpa_place is None else self.tpa_place[hand],
        )


class FeatureExtractor:
    """Computes per-frame AOI and TPA vectors against one scene."""

    def __init__(
        self,
        scene: Scene,
        aoi_cfg: AoiConfig = AoiConfig(),
        tpa_cfg: TpaConfig = TpaConfig(),
    ):
        self.scene = scene
        self.aoi_cfg = aoi_cfg
        self.tpa_cfg = tpa_cfg
        self.viewpoint = scene.viewpoint
        self._origin = scene.viewpoint.position
        from .geom import quat_rotate

        self._cam_up = quat_rotate(scene.viewpoint.orientation, np.array([0.0, 0.0, 1.0]))
        self._cam_fwd = quat_rotate(scene.viewpoint.orientation, np.array([0.0, 1.0, 0.0]))
        self._base = ScenePrimitives.from_scene(scene)
        self._work = self._base.copy()
        self._moved: set[int] = set()
        self.aoi_ids = self._base.ids

        self._gripper_row = {h: self._base.index_of(h.object_id) for h in Hand}
        # candidate universe: pick/place objects in scene order + other hand
        self._cand_rows = [
            k
            for k, o in enumerate(scene.objects)
            if o.kind in (ObjectKind.CYLINDER, ObjectKind.COASTER)
        ]
        self._cand_top_offset = np.zeros((len(self._cand_rows), 3))
        for i, k in enumerate(self._cand_rows):
            g = scene.objects[k].geometry
            if isinstance(g, CylinderGeom):
                self._cand_top_offset[i, 2] = g.height
        self.tpa_ids = {}
        for hand in Hand:
            other = hand.other.object_id
            self.tpa_ids[hand] = tuple(
                [scene.objects[k].id for k in self._cand_rows] + [other]
            )
        gripper_geom = scene.object(Hand.LEFT.object_id).geometry
        assert isinstance(gripper_geom, BoxGeom)
        self._gripper_top = gripper_geom.extents[2] / 2.0
        self._drop = {}
        for o in scene.objects:
            if isinstance(o.geometry, CylinderGeom):
                self._drop[o.id] = o.geometry.height + GRIP_CLEARANCE
            elif isinstance(o.geometry, BoxGeom):
                self._drop[o.id] = o.geometry.extents[2] / 2.0 + GRIP_CLEARANCE
            else:
                self._drop[o.id] = GRIP_CLEARANCE

    def _place_frame_objects(self, frame: Frame) -> None:
        from .scene import holding_order

        work, base = self._work, self._base
        for k in self._moved:
            work.positions[k] = base.positions[k]
            work.orientations[k] = base.orientations[k]
            work.corners[k] = base.corners[k]
        self._moved.clear()
        for hand in holding_order(frame):  # later write wins shared holds
            state = frame.hand(hand)
            row = self._gripper_row[hand]
            if not np.array_equal(state.orientation, work.orientations[row]):
                work.orientations[row] = state.orientation
                work.positions[row] = state.position
                work.refresh_corners(row)
            else:
                work.move_object(row, state.position)
            self._moved.add(row)
            if state.held_object is not None and state.held_object in work.ids:
                held_row = work.index_of(state.held_object)
                drop = self._drop[state.held_object]
                pos = state.position - np.array([0.0, 0.0, drop])
                if not np.array_equal(state.orientation, work.orientations[held_row]):
                    work.orientations[held_row] = state.orientation
                    work.positions[held_row] = pos
                    work.refresh_corners(held_row)
                else:
                    work.move_object(held_row, pos)
                self._moved.add(held_row)

    def aoi_vector(self, frame: Frame) -> np.ndarray:
        """Normalized attention likelihoods over all scene objects."""
        self._place_frame_objects(frame)
        u, v = window_basis_from_axes(self._cam_up, self._cam_fwd, frame.gaze_dir)
        _, index = cast_depth(self._work, self._origin, frame.gaze_dir, u, v, self.aoi_cfg)
        masses = masses_from_cast(self._work, index, self.aoi_cfg)
        return normalize_masses(masses, self.aoi_cfg)

    def _tpa_z_for(self, frame: Frame, hand: Hand) -> np.ndarray:
        state = frame.hand(hand)
        other = frame.hand(hand.other)
        centers = self._work.centers[self._cand_rows]
        tops = self._work.positions[self._cand_rows] + self._cand_top_offset
        centers = np.vstack([centers, other.position[None, :]])
        tops = np.vstack(
            [tops, (other.position + np.array([0.0, 0.0, self._gripper_top]))[None, :]]
        )
        return tpa_z_from_arrays(centers, tops, state.position, state.velocity, self.tpa_cfg)

    def tpa_vector_for(self, frame: Frame, hand: Hand) -> np.ndarray:
        """Softmax target-path likelihoods for one hand (13 candidates).

        Assumes _place_frame_objects already ran for this frame.
        """
        z = self._tpa_z_for(frame, hand)
        return softmax_neg(z, self.tpa_cfg.softmax_temperature)

    def tpa_vectors_for(self, frame: Frame, hand: Hand) -> tuple[np.ndarray, np.ndarray]:
        """(pick variant, place variant): while this hand carries an
        object, the place variant deprioritizes it before the softmax so
        the true destination's likelihood can rise."""
        z = self._tpa_z_for(frame, hand)
        vec = softmax_neg(z, self.tpa_cfg.softmax_temperature)
        held = frame.hand(hand).held_object
        ids = self.tpa_ids[hand]
        if held is None or held not in ids:
            return vec, vec
        z_place = place_adjusted_z(z, ids.index(held), self.tpa_cfg.held_z_factor)
        return vec, softmax_neg(z_place, self.tpa_cfg.softmax_temperature)

    def frame_features(
        self, frame: Frame, hands: tuple[Hand, ...] = (Hand.LEFT, Hand.RIGHT)
    ) -> tuple[np.ndarray, dict[Hand, np.ndarray]]:
        aoi = self.aoi_vector(frame)
        return aoi, {h: self.tpa_vector_for(frame, h) for h in hands}

    def frame_features_full(
        self, frame: Frame, hands: tuple[Hand, ...] = (Hand.LEFT, Hand.RIGHT)
    ) -> tuple[np.ndarray, dict[Hand, tuple[np.ndarray, np.ndarray]]]:
        aoi = self.aoi_vector(frame)
        return aoi, {h: self.tpa_vectors_for(frame, h) for h in hands}

    def process_sequence(
        self,
        seq: Sequence,
        tpa_spans: Optional[dict[Hand, tuple[int, int]]] = None,
    ) -> SequenceFeatures:
        """Raw features for a whole sequence.

        ``tpa_spans`` limits the (expensive) per-hand motion features to a
        frame range per hand; omitted hands get all-zero rows. The shared
        gaze vector always covers every frame.
        """
        T = len(seq.frames)
        n_aoi = len(self.aoi_ids)
        aoi = np.zeros((T, n_aoi))
        if tpa_spans is None:
            tpa_spans = {h: (0, T) for h in Hand}
        tpa = {h: np.zeros((T, len(self.tpa_ids[h]))) for h in Hand}
        tpa_place = {h: np.zeros((T, len(self.tpa_ids[h]))) for h in Hand}
        grasp = {h: np.zeros(T) for h in Hand}
        held: dict[Hand, list] = {h: [] for h in Hand}
        for i, frame in enumerate(seq.frames):
            aoi[i] = self.aoi_vector(frame)
            for h in Hand:
                span = tpa_spans.get(h)
                if span is not None and span[0] <= i < span[1]:
                    tpa[h][i], tpa_place[h][i] = self.tpa_vectors_for(frame, h)
                state = frame.hand(h)
                grasp[h][i] = 1.0 if state.trigger else 0.0
                held[h].append(state.held_object)
        return SequenceFeatures(
            times=seq.times,
            aoi_ids=self.aoi_ids,
            aoi=aoi,
            tpa_ids=dict(self.tpa_ids),
            tpa=tpa,
            grasp=grasp,
            held={h: tuple(v) for h, v in held.items()},
            tpa_place=tpa_place,
        )
