"""Streaming per-hand intention estimation and bimanual combination.

One engine instance holds the trained pick/place models once and runs
both hands through the same models each frame: the gaze likelihoods are
shared (up to the acting-gripper slot), grasp state and motion features
are per hand. Each hand scores 13 hypotheses (6 picks, 6 coaster places,
place onto the other hand) over the sliding window; the rule-based
combiner then recognizes multihand picks/places and handovers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .aoi import AoiConfig
from .features import CandidateAssembler, FeatureLayout, window_length
from .ghmm import GhmmModel, WindowStatus, classify_scores, log_likelihood_batch
from .pipeline import FeatureExtractor
from .scene import Action, Frame, Hand, Scene
from .tpa import TpaConfig, tpa_debug_payload


@dataclass(frozen=True)
class EngineConfig:
    dt: float = 0.45
    rate_hz: float = 120.0
    threshold: float = 0.0
    aoi: AoiConfig = AoiConfig()
    tpa: TpaConfig = TpaConfig()
    debug: bool = False


@dataclass
class HandIntentEstimate:
    hand: Hand
    t: float
    prediction: Optional[tuple[Action, str]]
    scores: dict[tuple[Action, str], float]
    window_status: WindowStatus

    @property
    def confident(self) -> bool:
        return self.prediction is not None


class BimanualKind(enum.Enum):
    MULTIHAND_PICK = "multihand_pick"
    MULTIHAND_PLACE = "multihand_place"
    HAND_OVER = "hand_over"
    INDEPENDENT = "independent"


@dataclass
class BimanualIntent:
    kind: BimanualKind
    target: Optional[str] = None  # multihand pick/place target
    from_hand: Optional[Hand] = None  # handover source
    to_hand: Optional[Hand] = None
    object_id: Optional[str] = None  # handed-over object
    left: Optional[HandIntentEstimate] = None
    right: Optional[HandIntentEstimate] = None


def combine_bimanual(
    left: HandIntentEstimate,
    right: HandIntentEstimate,
    left_held: Optional[str] = None,
    right_held: Optional[str] = None,
) -> BimanualIntent:
    """Rule-based combination of the two per-hand estimates.

    Precedence: handover, then multihand place, then multihand pick
    (a handover pattern superficially matches parts of the other rules).
    Pure function; swapping the hands swaps the handover direction.
    """
    lp, rp = left.prediction, right.prediction
    if lp is not None and rp is not None:
        # rule 3: placing onto the other hand while it picks the held object
        if (
            lp[0] is Action.PLACE
            and lp[1] == Hand.RIGHT.object_id
            and rp[0] is Action.PICK
            and left_held is not None
            and rp[1] == left_held
        ):
            return BimanualIntent(
                kind=BimanualKind.HAND_OVER,
                from_hand=Hand.LEFT,
                to_hand=Hand.RIGHT,
                object_id=left_held,
                left=left,
                right=right,
            )
        if (
            rp[0] is Action.PLACE
            and rp[1] == Hand.LEFT.object_id
            and lp[0] is Action.PICK
            and right_held is not None
            and lp[1] == right_held
        ):
            return BimanualIntent(
                kind=BimanualKind.HAND_OVER,
                from_hand=Hand.RIGHT,
                to_hand=Hand.LEFT,
                object_id=right_held,
                left=left,
                right=right,
            )
        # rule 2: both holding the same object and placing it at the same spot
        if (
            lp[0] is Action.PLACE
            and rp[0] is Action.PLACE
            and lp[1] == rp[1]
            and left_held is not None
            and left_held == right_held
        ):
            return BimanualIntent(
                kind=BimanualKind.MULTIHAND_PLACE, target=lp[1], left=left, right=right
            )
        # rule 1: both picking the same object
        if lp[0] is Action.PICK and rp[0] is Action.PICK and lp[1] == rp[1]:
            return BimanualIntent(
                kind=BimanualKind.MULTIHAND_PICK, target=lp[1], left=left, right=right
            )
    return BimanualIntent(kind=BimanualKind.INDEPENDENT, left=left, right=right)


@dataclass
class _HandChannel:
    layout: FeatureLayout
    assembler: CandidateAssembler
    candidates: list[tuple[Action, str]]
    buffer: np.ndarray  # (L, C, 8) ring
    count: int = 0
    held: Optional[str] = None
    last_pick_target: Optional[str] = None
    prev_trigger: bool = False
    last_tpa: Optional[np.ndarray] = None


class IntentEngine:
    """Per-session streaming estimator; step calls must be ordered."""

    def __init__(
        self,
        scene: Scene,
        models: Mapping[Action, GhmmModel],
        config: EngineConfig = EngineConfig(),
    ):
        self.scene = scene
        self.models = dict(models)
        self.config = config
        self.window = window_length(config.dt, config.rate_hz)
        self.extractor = FeatureExtractor(scene, config.aoi, config.tpa)
        self._channels: dict[Hand, _HandChannel] = {}
        for hand in Hand:
            layout = FeatureLayout.for_hand(scene, hand)
            candidates = layout.candidates(include_other_hand=True)
            assembler = CandidateAssembler(
                layout, candidates, self.extractor.aoi_ids, self.extractor.tpa_ids[hand]
            )
            self._channels[hand] = _HandChannel(
                layout=layout,
                assembler=assembler,
                candidates=candidates,
                buffer=np.zeros((self.window, len(candidates), 8)),
            )
        self._pick_cols = {
            h: np.array([i for i, (a, _) in enumerate(c.candidates) if a is Action.PICK])
            for h, c in self._channels.items()
        }
        self._place_cols = {
            h: np.array([i for i, (a, _) in enumerate(c.candidates) if a is Action.PLACE])
            for h, c in self._channels.items()
        }
        self._last_debug: Optional[dict] = None

    def reset(self) -> None:
        for ch in self._channels.values():
            ch.buffer[:] = 0.0
            ch.count = 0
            ch.held = None
            ch.last_pick_target = None
            ch.prev_trigger = False
            ch.last_tpa = None

    def _update_held(self, ch: _HandChannel, state) -> None:
        if state.held_object is not None:
            ch.held = state.held_object
        elif state.trigger and not ch.prev_trigger:
            ch.held = ch.last_pick_target  # live mode: infer from the last pick
        elif not state.trigger:
            ch.held = None
        ch.prev_trigger = state.trigger

    def step(self, frame: Frame) -> tuple[HandIntentEstimate, HandIntentEstimate]:
        aoi_vec = self.extractor.aoi_vector(frame)
        estimates = {}
        for hand in Hand:
            ch = self._channels[hand]
            state = frame.hand(hand)
            self._update_held(ch, state)
            tpa_vec, tpa_place_vec = self._tpa_pair(frame, hand, ch)
            ch.last_tpa = tpa_vec
            rows = ch.assembler.rows(aoi_vec, tpa_vec, state.trigger, ch.held, tpa_place_vec)
            ch.buffer[ch.count % self.window] = rows
            ch.count += 1
            estimates[hand] = self._score(ch, hand, frame.t)
        left, right = estimates[Hand.LEFT], estimates[Hand.RIGHT]
        for hand in Hand:
            pred = estimates[hand].prediction
            if pred is not None and pred[0] is Action.PICK:
                self._channels[hand].last_pick_target = pred[1]
        if self.config.debug:
            self._last_debug = self._build_debug(frame, aoi_vec)
        return left, right

    def _tpa_pair(self, frame: Frame, hand: Hand, ch: _HandChannel):
        from .tpa import place_adjusted_z, softmax_neg

        z = self.extractor._tpa_z_for(frame, hand)
        vec = softmax_neg(z, self.config.tpa.softmax_temperature)
        ids = self.extractor.tpa_ids[hand]
        if ch.held is None or ch.held not in ids:
            return vec, vec
        z_place = place_adjusted_z(z, ids.index(ch.held), self.config.tpa.held_z_factor)
        return vec, softmax_neg(z_place, self.config.tpa.softmax_temperature)

    def _score(self, ch: _HandChannel, hand: Hand, t: float) -> HandIntentEstimate:
        if ch.count < self.window:
            return HandIntentEstimate(
                hand=hand, t=t, prediction=None, scores={},
                window_status=WindowStatus.WARMING_UP,
            )
        head = ch.count % self.window
        ordered = np.concatenate([ch.buffer[head:], ch.buffer[:head]], axis=0)
        windows = np.ascontiguousarray(np.moveaxis(ordered, 1, 0))  # (C, L, 8)
        scores_arr = np.empty(len(ch.candidates))
        cols = self._pick_cols[hand]
        scores_arr[cols] = log_likelihood_batch(self.models[Action.PICK], windows[cols])
        cols = self._place_cols[hand]
        scores_arr[cols] = log_likelihood_batch(self.models[Action.PLACE], windows[cols])
        scores = {key: float(s) for key, s in zip(ch.candidates, scores_arr)}
        out = classify_scores(scores, self.config.threshold)
        return HandIntentEstimate(
            hand=hand, t=t, prediction=out.prediction, scores=scores,
            window_status=out.window_status,
        )

    def held_object(self, hand: Hand) -> Optional[str]:
        return self._channels[hand].held

    def step_bimanual(
        self, frame: Frame
    ) -> tuple[HandIntentEstimate, HandIntentEstimate, BimanualIntent]:
        left, right = self.step(frame)
        bimanual = combine_bimanual(
            left, right, self.held_object(Hand.LEFT), self.held_object(Hand.RIGHT)
        )
        return left, right, bimanual

    def _build_debug(self, frame: Frame, aoi_vec: np.ndarray) -> dict:
        from .scene import scene_for_frame

        snap = scene_for_frame(self.scene, frame)
        payload = {
            "aoi": {oid: float(x) for oid, x in zip(self.extractor.aoi_ids, aoi_vec)},
            "tpa": {},
            "paths": {},
        }
        for hand in Hand:
            ch = self._channels[hand]
            if ch.last_tpa is not None:
                payload["tpa"][hand.value] = {
                    oid: float(x) for oid, x in zip(self.extractor.tpa_ids[hand], ch.last_tpa)
                }
            payload["paths"][hand.value] = tpa_debug_payload(
                snap, frame.hand(hand), frame.hand(hand.other), hand.other.object_id, self.config.tpa
            )
        return payload

    @property
    def last_debug(self) -> Optional[dict]:
        return self._last_debug


def replay(
    engine: IntentEngine, frames, reset: bool = True
) -> list[tuple[HandIntentEstimate, HandIntentEstimate, BimanualIntent]]:
    """Run the engine over stored frames and collect every step's output."""
    if reset:
        engine.reset()
    return [engine.step_bimanual(f) for f in frames]
