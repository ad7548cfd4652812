"""Evaluation harness: cross-validation, earliness, sweeps, ablations.

Protocol: pick phases run from trial start to the grasp trigger, place
phases from trigger to release; handover trials contribute the picking
hand's features to the pick phase and the placing hand's to the place
phase. Every frame with a full window is evaluated; a prediction counts
as confident when its best window log-likelihood clears the threshold.
F1 scores are computed over confident frames only, and predictability is
the confident fraction of evaluated frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence as Seq

import numpy as np
from joblib import Parallel, delayed

from .aoi import AoiConfig
from .features import FEATURE_VAR_FLOOR, FeatureLayout, window_length
from .ghmm import GhmmModel, fit, sliding_window_scores
from .pipeline import FeatureExtractor, SequenceFeatures
from .scene import Action, Hand, PhaseSegment, Scene, Sequence
from .tpa import TpaConfig

FEATURE_COLUMNS = {
    "GS": np.array([0]),
    "AOI": np.array([1, 2, 3, 4]),
    "TPA": np.array([5, 6, 7]),
}
FULL_FEATURES = frozenset(("AOI", "TPA", "GS"))
DEFAULT_ABLATION_SETS = (
    frozenset(("AOI", "TPA", "GS")),
    frozenset(("AOI", "GS")),
    frozenset(("TPA", "GS")),
    frozenset(("AOI", "TPA")),
)
EARLINESS_OFFSETS_MS = np.arange(-900, 1, 100)


def feature_set(names) -> frozenset:
    fs = frozenset(names)
    if not fs or not fs <= FULL_FEATURES:
        raise ValueError(f"feature set must be a non-empty subset of {sorted(FULL_FEATURES)}")
    return fs


def zero_excluded(rows: np.ndarray, features: frozenset) -> np.ndarray:
    """Zero the columns of excluded feature groups (dimension preserved)."""
    if features == FULL_FEATURES:
        return rows
    out = rows.copy()
    for name, cols in FEATURE_COLUMNS.items():
        if name not in features:
            out[..., cols] = 0.0
    return out


@dataclass(frozen=True)
class SplitSpec:
    kind: str  # "user" | "hand"
    k: int


BY_USER = SplitSpec("user", 5)
BY_HAND = SplitSpec("hand", 2)


@dataclass
class EarlinessCurves:
    offsets_ms: np.ndarray
    pick_accuracy: np.ndarray
    pick_predictability: np.ndarray
    place_accuracy: np.ndarray
    place_predictability: np.ndarray


@dataclass
class MetricsBundle:
    per_intent_f1: dict[str, float]
    overall_f1: float
    predictability: float
    confusion: np.ndarray  # row-normalized over confident frames
    confusion_labels: list[str]
    earliness: EarlinessCurves
    metadata: dict = field(default_factory=dict)


def intent_key(action: Action, target: str) -> str:
    return f"{action.value}:{target}"


def intent_classes(scene: Scene) -> list[str]:
    return [intent_key(Action.PICK, a) for a in scene.pick_ids] + [
        intent_key(Action.PLACE, b) for b in scene.place_ids
    ]


# ---------------------------------------------------------------------------
# Feature precomputation


def _phase_spans(seq: Sequence, window: int) -> dict[Hand, tuple[int, int]]:
    """Frame ranges per hand over which motion features are needed.

    Handover trials keep both hands covered through the transfer so the
    giver's place-onto-hand and the receiver's grab are trainable.
    """
    spans: dict[Hand, tuple[int, int]] = {}
    for phase in seq.phases:
        lo = 0 if phase.name == "transfer" else max(0, phase.start - window - 1)
        hi = phase.end
        if phase.hand in spans:
            lo = min(lo, spans[phase.hand][0])
            hi = max(hi, spans[phase.hand][1])
        spans[phase.hand] = (lo, hi)
    if any(p.name == "transfer" for p in seq.phases):
        place = next(p for p in seq.phases if p.name == "place")
        lo, hi = spans.get(place.hand, (0, place.end))
        spans[place.hand] = (0, max(hi, place.end))
    return spans


def _features_for_sequence(scene, aoi_cfg, tpa_cfg, seq, window):
    extractor = FeatureExtractor(scene, aoi_cfg, tpa_cfg)
    return extractor.process_sequence(seq, tpa_spans=_phase_spans(seq, window))


def precompute_features(
    scene: Scene,
    dataset: Seq[Sequence],
    aoi_cfg: AoiConfig = AoiConfig(),
    tpa_cfg: TpaConfig = TpaConfig(),
    dt: float = 0.45,
    rate_hz: float = 120.0,
    n_jobs: int = 1,
) -> list[SequenceFeatures]:
    """Raw per-frame features for every trial (the expensive pass).

    Trials are independent, so this parallelizes across processes; the
    result order matches the dataset order either way.
    """
    window = window_length(dt, rate_hz)
    if n_jobs == 1:
        extractor = FeatureExtractor(scene, aoi_cfg, tpa_cfg)
        return [
            extractor.process_sequence(seq, tpa_spans=_phase_spans(seq, window))
            for seq in dataset
        ]
    return Parallel(n_jobs=n_jobs, batch_size=16)(
        delayed(_features_for_sequence)(scene, aoi_cfg, tpa_cfg, seq, window)
        for seq in dataset
    )


# ---------------------------------------------------------------------------
# Training and per-phase evaluation


@dataclass
class PhaseRecord:
    """One phase frame. ``available`` marks a full history window; frames
    without one never carry a prediction but still count as observations
    for the earliness curves."""

    true_key: str
    pred_key: Optional[str]
    phase_name: str
    t_to_end: float
    hand: Hand
    user_id: int
    available: bool = True


def train_models(
    scene: Scene,
    dataset: Seq[Sequence],
    feats: Seq[SequenceFeatures],
    indices: Seq[int],
    features: frozenset = FULL_FEATURES,
    K: int = 4,
    seed: int = 0,
    n_restarts: int = 5,
    max_iter: int = 30,
    tol: float = 1e-4,
    var_floor=FEATURE_VAR_FLOOR,
    include_transfer: bool = False,
) -> dict[Action, GhmmModel]:
    """Fit the pick and place models on ground-truth-rearranged phases.

    ``include_transfer`` additionally rearranges handover transfers: the
    giver's segment trains place-onto-the-other-hand and the receiver's
    run-up trains picking the carried object. The cross-validation
    protocol never uses this; the live bimanual engine's models do.
    """
    train_rows: dict[Action, list[np.ndarray]] = {Action.PICK: [], Action.PLACE: []}
    for i in indices:
        seq, sf = dataset[i], feats[i]
        for phase in seq.phases:
            if phase.label is None:
                continue
            layout = FeatureLayout.for_hand(scene, phase.hand)
            rows = sf.stream(phase.hand).assemble(phase.label.action, phase.label.target, layout)
            rows = zero_excluded(rows[phase.start : phase.end], features)
            if len(rows) >= 2:
                train_rows[phase.label.action].append(rows)
        if include_transfer:
            # the receiver's grab is a pick of the carried object and the
            # giver's presentation is a place onto the receiving hand
            transfer = next((p for p in seq.phases if p.name == "transfer"), None)
            if transfer is None:
                continue
            place = next(p for p in seq.phases if p.name == "place")
            held = seq.phases[0].label.target
            giver_layout = FeatureLayout.for_hand(scene, transfer.hand)
            giver_rows = sf.stream(transfer.hand).assemble(
                Action.PLACE, giver_layout.other_hand_id, giver_layout
            )
            pick_end = seq.phases[0].end
            giver_rows = zero_excluded(giver_rows[pick_end : transfer.end], features)
            if len(giver_rows) >= 2:
                train_rows[Action.PLACE].append(giver_rows)
            recv_layout = FeatureLayout.for_hand(scene, place.hand)
            recv_rows = sf.stream(place.hand).assemble(Action.PICK, held, recv_layout)
            recv_rows = zero_excluded(recv_rows[: place.start], features)
            if len(recv_rows) >= 2:
                train_rows[Action.PICK].append(recv_rows)
    models = {}
    for action, seqs in train_rows.items():
        if not seqs:
            raise ValueError(f"no training phases for {action.value}")
        models[action] = fit(
            seqs, K=K, max_iter=max_iter, tol=tol, seed=seed, n_restarts=n_restarts,
            var_floor=var_floor, hypothesis=action,
        )
    return models


def evaluate_phases(
    scene: Scene,
    dataset: Seq[Sequence],
    feats: Seq[SequenceFeatures],
    indices: Seq[int],
    models: dict[Action, GhmmModel],
    features: frozenset = FULL_FEATURES,
    dt: float = 0.45,
    rate_hz: float = 120.0,
    threshold: float = 0.0,
) -> list[PhaseRecord]:
    """Score every full-window frame of every labeled phase."""
    window = window_length(dt, rate_hz)
    records: list[PhaseRecord] = []
    for i in indices:
        seq, sf = dataset[i], feats[i]
        times = sf.times
        by_hand: dict[Hand, list[PhaseSegment]] = {}
        for phase in seq.phases:
            if phase.label is not None:
                by_hand.setdefault(phase.hand, []).append(phase)
        for hand, phases in by_hand.items():
            layout = FeatureLayout.for_hand(scene, hand)
            stream = sf.stream(hand)
            candidates = layout.candidates()
            rows = np.stack(
                [
                    zero_excluded(stream.assemble(a, c, layout), features)
                    for a, c in candidates
                ]
            )  # (12, T, 8)
            keys = [intent_key(a, c) for a, c in candidates]
            pick_rows = np.array([k for k, (a, _) in enumerate(candidates) if a is Action.PICK])
            place_rows = np.array([k for k, (a, _) in enumerate(candidates) if a is Action.PLACE])
            scores = np.empty((len(candidates), len(times)))
            scores[pick_rows] = sliding_window_scores(models[Action.PICK], rows[pick_rows], window)
            scores[place_rows] = sliding_window_scores(models[Action.PLACE], rows[place_rows], window)
            for phase in phases:
                t_end = times[min(phase.end, len(times) - 1)]
                for t_idx in range(phase.start, phase.end):
                    available = t_idx >= window - 1
                    pred = None
                    if available:
                        col = scores[:, t_idx]
                        best = int(np.argmax(col))
                        pred = keys[best] if col[best] > threshold else None
                    records.append(
                        PhaseRecord(
                            true_key=intent_key(phase.label.action, phase.label.target),
                            pred_key=pred,
                            phase_name=phase.name,
                            t_to_end=float(t_end - times[t_idx]),
                            hand=hand,
                            user_id=seq.user_id,
                            available=available,
                        )
                    )
    return records


# ---------------------------------------------------------------------------
# Metrics


def _f1_scores(records: list[PhaseRecord], classes: list[str]) -> dict[str, float]:
    confident = [r for r in records if r.pred_key is not None]
    out = {}
    for c in classes:
        tp = sum(1 for r in confident if r.true_key == c and r.pred_key == c)
        fp = sum(1 for r in confident if r.true_key != c and r.pred_key == c)
        fn = sum(1 for r in confident if r.true_key == c and r.pred_key != c)
        if tp + fp + fn == 0:
            out[c] = float("nan")  # class absent among confident frames
        else:
            out[c] = 2 * tp / (2 * tp + fp + fn)
    return out


def _confusion(records: list[PhaseRecord], classes: list[str]) -> np.ndarray:
    idx = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)))
    for r in records:
        if r.pred_key is None or r.pred_key not in idx or r.true_key not in idx:
            continue
        counts[idx[r.true_key], idx[r.pred_key]] += 1
    rows = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)


def earliness_from_records(records: list[PhaseRecord]) -> EarlinessCurves:
    """Accuracy among confident frames and predictability per 100 ms bin
    counted backward from the end of each phase."""
    offsets = EARLINESS_OFFSETS_MS
    acc = {"pick": np.full(len(offsets), np.nan), "place": np.full(len(offsets), np.nan)}
    pred = {"pick": np.zeros(len(offsets)), "place": np.zeros(len(offsets))}
    for phase_name in ("pick", "place"):
        phase_records = [r for r in records if r.phase_name == phase_name]
        for b, off in enumerate(offsets):
            center = -off / 1000.0
            in_bin = [r for r in phase_records if abs(r.t_to_end - center) <= 0.05]
            if not in_bin:
                continue
            confident = [r for r in in_bin if r.pred_key is not None]
            pred[phase_name][b] = len(confident) / len(in_bin)
            if confident:
                acc[phase_name][b] = sum(
                    1 for r in confident if r.pred_key == r.true_key
                ) / len(confident)
    return EarlinessCurves(
        offsets_ms=offsets.copy(),
        pick_accuracy=acc["pick"],
        pick_predictability=pred["pick"],
        place_accuracy=acc["place"],
        place_predictability=pred["place"],
    )


def metrics_from_records(
    records: list[PhaseRecord], classes: list[str], metadata: Optional[dict] = None
) -> MetricsBundle:
    per_intent = _f1_scores(records, classes)
    defined = [v for v in per_intent.values() if not np.isnan(v)]
    overall = float(np.mean(defined)) if defined else float("nan")
    evaluated = sum(1 for r in records if r.available)
    predictability = (
        sum(1 for r in records if r.pred_key is not None) / evaluated if evaluated else 0.0
    )
    return MetricsBundle(
        per_intent_f1=per_intent,
        overall_f1=overall,
        predictability=predictability,
        confusion=_confusion(records, classes),
        confusion_labels=list(classes),
        earliness=earliness_from_records(records),
        metadata=metadata or {},
    )


# ---------------------------------------------------------------------------
# Cross-validation and studies


def make_folds(dataset: Seq[Sequence], split: SplitSpec) -> list[tuple[list[int], list[int]]]:
    """(train indices, test indices) per fold.

    By-user folds hold out whole participants; by-hand folds are built at
    the phase level inside train/evaluate, so here fold 0 tests left-hand
    phases of every trial and fold 1 the right-hand ones.
    """
    if split.kind == "user":
        users = sorted({s.user_id for s in dataset})
        chunks = [list(c) for c in np.array_split(users, split.k)]
        folds = []
        for held in chunks:
            test = [i for i, s in enumerate(dataset) if s.user_id in held]
            train = [i for i, s in enumerate(dataset) if s.user_id not in held]
            folds.append((train, test))
        return folds
    if split.kind == "hand":
        everything = list(range(len(dataset)))
        return [(everything, everything), (everything, everything)]
    raise ValueError(f"unknown split kind {split.kind!r}")


def _hand_filtered(records: list[PhaseRecord], hand: Hand) -> list[PhaseRecord]:
    return [r for r in records if r.hand is hand]


def cross_validate(
    dataset: Seq[Sequence],
    scene: Scene,
    split: SplitSpec = BY_USER,
    features: frozenset = FULL_FEATURES,
    dt: float = 0.45,
    rate_hz: float = 120.0,
    seed: int = 0,
    feats: Optional[Seq[SequenceFeatures]] = None,
    n_jobs: int = 1,
    K: int = 4,
    n_restarts: int = 5,
    max_iter: int = 30,
) -> MetricsBundle:
    """Train/evaluate per fold and aggregate one metrics bundle.

    By-hand validation trains on one hand's phases and tests on the
    other's, both directions. ``feats`` reuses a precomputed feature pass.
    """
    features = feature_set(features)
    if feats is None:
        feats = precompute_features(scene, dataset, dt=dt, rate_hz=rate_hz, n_jobs=n_jobs)
    classes = intent_classes(scene)
    records: list[PhaseRecord] = []
    if split.kind == "hand":
        all_idx = list(range(len(dataset)))
        for fold, test_hand in enumerate((Hand.LEFT, Hand.RIGHT)):
            models = _train_hand_fold(
                scene, dataset, feats, all_idx, test_hand.other, features,
                K=K, seed=seed + fold, n_restarts=n_restarts, max_iter=max_iter, dt=dt,
            )
            fold_records = evaluate_phases(
                scene, dataset, feats, all_idx, models, features, dt, rate_hz
            )
            records.extend(_hand_filtered(fold_records, test_hand))
    else:
        for fold, (train_idx, test_idx) in enumerate(make_folds(dataset, split)):
            models = train_models(
                scene, dataset, feats, train_idx, features,
                K=K, seed=seed + fold, n_restarts=n_restarts, max_iter=max_iter,
            )
            records.extend(
                evaluate_phases(scene, dataset, feats, test_idx, models, features, dt, rate_hz)
            )
    return metrics_from_records(
        records,
        classes,
        metadata={
            "split": f"{split.kind}-{split.k}",
            "features": sorted(features),
            "dt": dt,
            "n_records": len(records),
            "seed": seed,
        },
    )


def _train_hand_fold(
    scene, dataset, feats, indices, train_hand: Hand, features, K, seed, n_restarts, max_iter, dt
):
    """Fit on the phases performed with one hand only."""
    train_rows: dict[Action, list[np.ndarray]] = {Action.PICK: [], Action.PLACE: []}
    for i in indices:
        seq, sf = dataset[i], feats[i]
        for phase in seq.phases:
            if phase.label is None or phase.hand is not train_hand:
                continue
            layout = FeatureLayout.for_hand(scene, phase.hand)
            rows = sf.stream(phase.hand).assemble(phase.label.action, phase.label.target, layout)
            rows = zero_excluded(rows[phase.start : phase.end], features)
            if len(rows) >= 2:
                train_rows[phase.label.action].append(rows)
    return {
        action: fit(
            seqs, K=K, max_iter=max_iter, seed=seed, n_restarts=n_restarts,
            var_floor=FEATURE_VAR_FLOOR, hypothesis=action,
        )
        for action, seqs in train_rows.items()
    }


def earliness_curves(
    dataset: Seq[Sequence],
    scene: Scene,
    models: dict[Action, GhmmModel],
    dt: float = 0.45,
    rate_hz: float = 120.0,
    feats: Optional[Seq[SequenceFeatures]] = None,
    n_jobs: int = 1,
) -> EarlinessCurves:
    """Earliness with fixed models over a whole dataset."""
    if feats is None:
        feats = precompute_features(scene, dataset, dt=dt, rate_hz=rate_hz, n_jobs=n_jobs)
    records = evaluate_phases(
        scene, dataset, feats, list(range(len(dataset))), models, FULL_FEATURES, dt, rate_hz
    )
    return earliness_from_records(records)


def sweep_window(
    dataset: Seq[Sequence],
    scene: Scene,
    dts: Seq[float],
    features: frozenset = FULL_FEATURES,
    seed: int = 0,
    feats: Optional[Seq[SequenceFeatures]] = None,
    n_jobs: int = 1,
    rate_hz: float = 120.0,
    K: int = 4,
    n_restarts: int = 3,
    max_iter: int = 30,
) -> list[dict]:
    """(F1, predictability) per window size on the first by-user fold."""
    if not dts or any(d <= 0 for d in dts):
        raise ValueError("window sizes must be positive")
    if feats is None:
        feats = precompute_features(scene, dataset, dt=max(dts), rate_hz=rate_hz, n_jobs=n_jobs)
    train_idx, test_idx = make_folds(dataset, BY_USER)[0]
    classes = intent_classes(scene)
    out = []
    for dt in dts:
        models = train_models(
            scene, dataset, feats, train_idx, features, K=K, seed=seed,
            n_restarts=n_restarts, max_iter=max_iter,
        )
        records = evaluate_phases(
            scene, dataset, feats, test_idx, models, features, dt, rate_hz
        )
        bundle = metrics_from_records(records, classes, {"dt": dt})
        out.append(
            {"dt": dt, "overall_f1": bundle.overall_f1, "predictability": bundle.predictability}
        )
    return out


def ablate(
    dataset: Seq[Sequence],
    scene: Scene,
    sets: Seq[frozenset] = DEFAULT_ABLATION_SETS,
    dt: float = 0.45,
    seed: int = 0,
    feats: Optional[Seq[SequenceFeatures]] = None,
    n_jobs: int = 1,
    **cv_kwargs,
) -> dict:
    """Feature-combination study over both validation splits."""
    if feats is None:
        feats = precompute_features(scene, dataset, dt=dt, n_jobs=n_jobs)
    table = {}
    for fs in sets:
        for split in (BY_USER, BY_HAND):
            bundle = cross_validate(
                dataset, scene, split=split, features=fs, dt=dt, seed=seed,
                feats=feats, **cv_kwargs,
            )
            key = ("+".join(sorted(fs)), split.kind)
            table[key] = {
                "overall_f1": bundle.overall_f1,
                "predictability": bundle.predictability,
            }
    return table


def format_ablation_table(table: dict) -> str:
    sets = sorted({k[0] for k in table})
    lines = ["feature set           split   F1      predictability"]
    for fs in sets:
        for split in ("user", "hand"):
            entry = table.get((fs, split))
            if entry is None:
                continue
            lines.append(
                f"{fs:<21} {split:<7} {entry['overall_f1']:.3f}   {entry['predictability']:.3f}"
            )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Reports


def bundle_to_dict(bundle: MetricsBundle) -> dict:
    e = bundle.earliness
    return {
        "per_intent_f1": bundle.per_intent_f1,
        "overall_f1": bundle.overall_f1,
        "predictability": bundle.predictability,
        "confusion": bundle.confusion.tolist(),
        "confusion_labels": bundle.confusion_labels,
        "earliness": {
            "offsets_ms": e.offsets_ms.tolist(),
            "pick_accuracy": e.pick_accuracy.tolist(),
            "pick_predictability": e.pick_predictability.tolist(),
            "place_accuracy": e.place_accuracy.tolist(),
            "place_predictability": e.place_predictability.tolist(),
        },
        "metadata": bundle.metadata,
    }


def format_bundle(bundle: MetricsBundle) -> str:
    lines = [
        f"split: {bundle.metadata.get('split', '?')}  features: {'+'.join(bundle.metadata.get('features', []))}",
        f"overall macro F1: {bundle.overall_f1:.3f}",
        f"predictability:   {bundle.predictability:.3f}",
        "per-intent F1:",
    ]
    for k, v in bundle.per_intent_f1.items():
        lines.append(f"  {k:<12} {v:.3f}" if not np.isnan(v) else f"  {k:<12} undefined")
    return "\n".join(lines)
