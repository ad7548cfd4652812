"""Candidate-conditioned observation vectors and sliding windows.

Raw per-frame quantities (shared gaze likelihoods, per-hand target-path
likelihoods, grasp trigger) are rearranged per candidate hypothesis into
an 8-dimensional vector:

    [grasp, aoi_target, aoi_other_same_kind, aoi_other_kind_sum,
     aoi_robot_hand, tpa_target, tpa_other_same_kind, tpa_other_kind_sum]

Under a pick hypothesis the "same kind" objects are the other pick
targets; under a place hypothesis the roles of pick and place targets
swap, and the held object's path likelihood is clamped just below every
other object's before summing so it cannot dominate the distractor term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence as Seq

import numpy as np

from .scene import Action, Hand, Scene

FEATURE_NAMES = (
    "grasp_state",
    "aoi_target",
    "aoi_other_same_kind",
    "aoi_other_kind_sum",
    "aoi_robot_hand",
    "tpa_target",
    "tpa_other_same_kind",
    "tpa_other_kind_sum",
)

HELD_CLAMP_FACTOR = 0.95
_RENORM_FLOOR = 1e-12

GS_COLUMN = np.array([0])
AOI_COLUMNS = np.array([1, 2, 3, 4])
TPA_COLUMNS = np.array([5, 6, 7])

# Emission variance floors per dimension: the grasp bit is exact (a flip
# must stay decisive through a whole window), the probability features
# carry gaze/path noise.
FEATURE_VAR_FLOOR = np.array([1e-5] + [1e-3] * 7)


@dataclass(frozen=True)
class FeatureLayout:
    """Which ids play which role when assembling features for one hand."""

    pick_ids: tuple[str, ...]
    place_ids: tuple[str, ...]
    acting_hand_id: str
    other_hand_id: str

    @classmethod
    def for_hand(cls, scene: Scene, hand: Hand) -> "FeatureLayout":
        return cls(
            pick_ids=scene.pick_ids,
            place_ids=scene.place_ids,
            acting_hand_id=hand.object_id,
            other_hand_id=hand.other.object_id,
        )

    def check_candidate(self, hypothesis: Action, candidate_id: str) -> None:
        if hypothesis is Action.PICK and candidate_id not in self.pick_ids:
            raise ValueError(f"pick hypothesis cannot target {candidate_id!r}")
        if hypothesis is Action.PLACE and candidate_id not in (
            *self.place_ids,
            self.other_hand_id,
        ):
            raise ValueError(f"place hypothesis cannot target {candidate_id!r}")

    def candidates(self, include_other_hand: bool = False) -> list[tuple[Action, str]]:
        cands = [(Action.PICK, i) for i in self.pick_ids]
        cands += [(Action.PLACE, i) for i in self.place_ids]
        if include_other_hand:
            cands.append((Action.PLACE, self.other_hand_id))
        return cands


def window_length(dt: float, rate_hz: float) -> int:
    return int(round(dt * rate_hz))


@dataclass
class WindowMatrix:
    values: np.ndarray  # (T, 8), time ordered
    candidate_id: Optional[str] = None
    hypothesis: Optional[Action] = None


def _clamped_tpa(tpa: np.ndarray, held_col: int, factor: float) -> np.ndarray:
    """Copy with the held entry capped just below every other entry."""
    adj = tpa.copy()
    masked = tpa.copy()
    masked[..., held_col] = np.inf
    adj[..., held_col] = np.minimum(adj[..., held_col], factor * masked.min(axis=-1))
    return adj


def _role_ids(layout: FeatureLayout, hypothesis: Action, candidate_id: str):
    """(same-kind ids without the candidate, other-kind ids) for a hypothesis."""
    if hypothesis is Action.PICK:
        same = [i for i in layout.pick_ids if i != candidate_id]
        other = list(layout.place_ids)
    else:
        same = [i for i in layout.place_ids if i != candidate_id]
        other = list(layout.pick_ids)
    return same, other


def assemble(
    aoi: Mapping[str, float],
    tpa: Mapping[str, float],
    grasp: bool,
    hypothesis: Action,
    candidate_id: str,
    held_object: Optional[str],
    layout: FeatureLayout,
    clamp_factor: float = HELD_CLAMP_FACTOR,
) -> np.ndarray:
    """One frame's 8-vector under one candidate hypothesis.

    The four attention slots are renormalized over the acting hand's
    relevant areas (candidate, distractors, acting gripper); a sentinel
    all-zero attention vector passes through as zeros.
    """
    layout.check_candidate(hypothesis, candidate_id)
    same_ids, other_ids = _role_ids(layout, hypothesis, candidate_id)

    out = np.zeros(8)
    out[0] = 1.0 if grasp else 0.0

    a_t = aoi.get(candidate_id, 0.0)
    a_same = sum(aoi.get(i, 0.0) for i in same_ids)
    a_other = sum(aoi.get(i, 0.0) for i in other_ids)
    a_hand = aoi.get(layout.acting_hand_id, 0.0)
    total = a_t + a_same + a_other + a_hand
    if total > _RENORM_FLOOR:
        out[1:5] = np.array([a_t, a_same, a_other, a_hand]) / total

    tpa_vals = dict(tpa)
    if hypothesis is Action.PLACE and held_object is not None and held_object in tpa_vals:
        others = [v for k, v in tpa_vals.items() if k != held_object]
        if others:
            tpa_vals[held_object] = min(tpa_vals[held_object], clamp_factor * min(others))
    out[5] = tpa_vals.get(candidate_id, 0.0)
    out[6] = sum(tpa_vals.get(i, 0.0) for i in same_ids)
    out[7] = sum(tpa_vals.get(i, 0.0) for i in other_ids)
    return out


def extract_window(
    times: np.ndarray,
    rows: np.ndarray,
    t_end: float,
    dt: float = 0.45,
    rate_hz: float = 120.0,
    candidate_id: Optional[str] = None,
    hypothesis: Optional[Action] = None,
) -> Optional[WindowMatrix]:
    """Last ``round(dt * rate)`` rows ending at ``t_end``, or None.

    Returns None (window unavailable) when fewer rows exist or the span
    would reach before the sequence start; callers must not emit a
    prediction in that case.
    """
    times = np.asarray(times)
    length = window_length(dt, rate_hz)
    i_end = int(np.searchsorted(times, t_end, side="right")) - 1
    if i_end < 0:
        return None
    start = i_end - length + 1
    if start < 0 or times[i_end] - dt < times[0] - 0.5 / rate_hz:
        return None
    return WindowMatrix(
        values=rows[start : i_end + 1], candidate_id=candidate_id, hypothesis=hypothesis
    )


# ---------------------------------------------------------------------------
# Vectorized assembly


def _index_of(ids: Seq[str], wanted: str) -> int:
    try:
        return list(ids).index(wanted)
    except ValueError:
        return -1


def _sum_mask(ids: Seq[str], wanted: Seq[str]) -> np.ndarray:
    mask = np.zeros(len(ids))
    for w in wanted:
        k = _index_of(ids, w)
        if k >= 0:
            mask[k] = 1.0
    return mask


def assemble_rows(
    aoi_ids: Seq[str],
    aoi: np.ndarray,
    tpa_ids: Seq[str],
    tpa: np.ndarray,
    grasp: np.ndarray,
    held: Seq[Optional[str]],
    hypothesis: Action,
    candidate_id: str,
    layout: FeatureLayout,
    clamp_factor: float = HELD_CLAMP_FACTOR,
) -> np.ndarray:
    """Whole-stream assembly: (T, 8) rows for one candidate hypothesis."""
    layout.check_candidate(hypothesis, candidate_id)
    same_ids, other_ids = _role_ids(layout, hypothesis, candidate_id)
    T = len(aoi)
    out = np.zeros((T, 8))
    out[:, 0] = np.asarray(grasp, dtype=float)

    a_t = aoi[:, _index_of(aoi_ids, candidate_id)] if _index_of(aoi_ids, candidate_id) >= 0 else np.zeros(T)
    a_same = aoi @ _sum_mask(aoi_ids, same_ids)
    a_other = aoi @ _sum_mask(aoi_ids, other_ids)
    a_hand = aoi[:, _index_of(aoi_ids, layout.acting_hand_id)]
    total = a_t + a_same + a_other + a_hand
    scale = np.where(total > _RENORM_FLOOR, 1.0 / np.where(total > _RENORM_FLOOR, total, 1.0), 0.0)
    out[:, 1] = a_t * scale
    out[:, 2] = a_same * scale
    out[:, 3] = a_other * scale
    out[:, 4] = a_hand * scale

    tpa_adj = np.asarray(tpa, dtype=float)
    if hypothesis is Action.PLACE:
        held_arr = np.array([h if h is not None else "" for h in held])
        held_ids = sorted(set(held_arr) - {""})
        if held_ids:
            tpa_adj = tpa_adj.copy()
            for held_id in held_ids:
                col = _index_of(tpa_ids, held_id)
                if col < 0:
                    continue
                rows_mask = held_arr == held_id
                tpa_adj[rows_mask] = _clamped_tpa(tpa_adj[rows_mask], col, clamp_factor)

    k_t = _index_of(tpa_ids, candidate_id)
    out[:, 5] = tpa_adj[:, k_t] if k_t >= 0 else 0.0
    out[:, 6] = tpa_adj @ _sum_mask(tpa_ids, same_ids)
    out[:, 7] = tpa_adj @ _sum_mask(tpa_ids, other_ids)
    return out


@dataclass
class RawFeatureStream:
    """One hand's raw per-frame features over a whole sequence."""

    times: np.ndarray  # (T,)
    aoi_ids: tuple[str, ...]
    aoi: np.ndarray  # (T, n_aoi) shared gaze likelihoods
    tpa_ids: tuple[str, ...]
    tpa: np.ndarray  # (T, n_tpa) this hand's target-path likelihoods
    grasp: np.ndarray  # (T,)
    held: tuple[Optional[str], ...]
    tpa_place: Optional[np.ndarray] = None  # held-deprioritized variant

    def assemble(
        self,
        hypothesis: Action,
        candidate_id: str,
        layout: FeatureLayout,
        clamp_factor: float = HELD_CLAMP_FACTOR,
    ) -> np.ndarray:
        tpa = self.tpa
        if hypothesis is Action.PLACE and self.tpa_place is not None:
            tpa = self.tpa_place
        return assemble_rows(
            self.aoi_ids,
            self.aoi,
            self.tpa_ids,
            tpa,
            self.grasp,
            self.held,
            hypothesis,
            candidate_id,
            layout,
            clamp_factor,
        )


class CandidateAssembler:
    """Precompiled index maps for assembling one hand's full candidate set.

    Turns one frame's raw vectors into a (n_candidates, 8) block with a
    handful of matrix products; used on the streaming hot path.
    """

    def __init__(
        self,
        layout: FeatureLayout,
        candidates: list[tuple[Action, str]],
        aoi_ids: Seq[str],
        tpa_ids: Seq[str],
        clamp_factor: float = HELD_CLAMP_FACTOR,
    ):
        self.layout = layout
        self.candidates = list(candidates)
        self.aoi_ids = tuple(aoi_ids)
        self.tpa_ids = tuple(tpa_ids)
        self.clamp_factor = clamp_factor
        C = len(candidates)
        self._aoi_t = np.zeros(C, dtype=int)
        self._tpa_t = np.zeros(C, dtype=int)
        self._m_aoi_same = np.zeros((C, len(aoi_ids)))
        self._m_aoi_other = np.zeros((C, len(aoi_ids)))
        self._m_tpa_same = np.zeros((C, len(tpa_ids)))
        self._m_tpa_other = np.zeros((C, len(tpa_ids)))
        self._is_place = np.zeros(C, dtype=bool)
        self._aoi_hand = _index_of(aoi_ids, layout.acting_hand_id)
        for c, (hyp, cand) in enumerate(candidates):
            layout.check_candidate(hyp, cand)
            same_ids, other_ids = _role_ids(layout, hyp, cand)
            self._aoi_t[c] = _index_of(aoi_ids, cand)
            self._tpa_t[c] = _index_of(tpa_ids, cand)
            self._m_aoi_same[c] = _sum_mask(aoi_ids, same_ids)
            self._m_aoi_other[c] = _sum_mask(aoi_ids, other_ids)
            self._m_tpa_same[c] = _sum_mask(tpa_ids, same_ids)
            self._m_tpa_other[c] = _sum_mask(tpa_ids, other_ids)
            self._is_place[c] = hyp is Action.PLACE

    def rows(
        self,
        aoi_vec: np.ndarray,
        tpa_vec: np.ndarray,
        grasp: bool,
        held: Optional[str],
        tpa_place_vec: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        C = len(self.candidates)
        out = np.zeros((C, 8))
        out[:, 0] = 1.0 if grasp else 0.0

        a_t = aoi_vec[self._aoi_t]
        a_same = self._m_aoi_same @ aoi_vec
        a_other = self._m_aoi_other @ aoi_vec
        a_hand = aoi_vec[self._aoi_hand]
        total = a_t + a_same + a_other + a_hand
        scale = np.where(total > _RENORM_FLOOR, 1.0 / np.where(total > _RENORM_FLOOR, total, 1.0), 0.0)
        out[:, 1] = a_t * scale
        out[:, 2] = a_same * scale
        out[:, 3] = a_other * scale
        out[:, 4] = a_hand * scale

        tpa_place = tpa_place_vec if tpa_place_vec is not None else tpa_vec
        if held is not None:
            col = _index_of(self.tpa_ids, held)
            if col >= 0:
                tpa_place = _clamped_tpa(tpa_place, col, self.clamp_factor)
        t_pick = tpa_vec[self._tpa_t]
        t_place = tpa_place[self._tpa_t]
        out[:, 5] = np.where(self._is_place, t_place, t_pick)
        out[:, 6] = np.where(self._is_place, self._m_tpa_same @ tpa_place, self._m_tpa_same @ tpa_vec)
        out[:, 7] = np.where(self._is_place, self._m_tpa_other @ tpa_place, self._m_tpa_other @ tpa_vec)
        return out
