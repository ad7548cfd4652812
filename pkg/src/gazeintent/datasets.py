"""Line-delimited JSON persistence for scenes and labeled sequences.

File layout: one header record followed by one record per sequence.
Field names are documented in docs/dataset_format.md; paths ending in
``.gz`` are transparently gzip-compressed.
"""

from __future__ import annotations

import gzip
import hashlib
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .scene import (
    Action,
    BoxGeom,
    CylinderGeom,
    DiscGeom,
    Frame,
    Hand,
    HandState,
    IntentLabel,
    ObjectKind,
    PhaseSegment,
    Pose,
    Scene,
    SceneObject,
    Sequence,
    validate_sequence,
)

FORMAT_VERSION = 1


class DatasetError(ValueError):
    """Raised when a dataset file cannot be read back faithfully."""


def _open(path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


# ---------------------------------------------------------------------------
# Scene serialization


def scene_to_dict(scene: Scene) -> dict:
    objs = []
    for o in scene.objects:
        d = {
            "id": o.id,
            "kind": o.kind.value,
            "position": o.pose.position.tolist(),
            "orientation": o.pose.orientation.tolist(),
        }
        if isinstance(o.geometry, CylinderGeom):
            d["geometry"] = {"type": "cylinder", "radius": o.geometry.radius, "height": o.geometry.height}
        elif isinstance(o.geometry, DiscGeom):
            d["geometry"] = {"type": "disc", "radius": o.geometry.radius}
        else:
            d["geometry"] = {"type": "box", "extents": list(o.geometry.extents)}
        objs.append(d)
    return {
        "objects": objs,
        "viewpoint": {
            "position": scene.viewpoint.position.tolist(),
            "orientation": scene.viewpoint.orientation.tolist(),
        },
        "table_height": scene.table_height,
    }


def scene_from_dict(d: dict) -> Scene:
    objs = []
    for od in d["objects"]:
        g = od["geometry"]
        if g["type"] == "cylinder":
            geom = CylinderGeom(g["radius"], g["height"])
        elif g["type"] == "disc":
            geom = DiscGeom(g["radius"])
        elif g["type"] == "box":
            geom = BoxGeom(tuple(g["extents"]))
        else:
            raise DatasetError(f"unknown geometry type {g['type']!r}")
        objs.append(
            SceneObject(
                id=od["id"],
                kind=ObjectKind(od["kind"]),
                pose=Pose(position=od["position"], orientation=od["orientation"]),
                geometry=geom,
            )
        )
    vp = d["viewpoint"]
    return Scene(
        objects=tuple(objs),
        viewpoint=Pose(position=vp["position"], orientation=vp["orientation"]),
        table_height=d.get("table_height", 0.0),
    )


def scene_hash(scene: Scene) -> str:
    blob = json.dumps(scene_to_dict(scene), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Sequence serialization


def _hand_to_dict(frames: tuple[Frame, ...], hand: Hand) -> dict:
    states = [f.hand(hand) for f in frames]
    return {
        "position": [s.position.tolist() for s in states],
        "velocity": [s.velocity.tolist() for s in states],
        "orientation": [s.orientation.tolist() for s in states],
        "trigger": [int(s.trigger) for s in states],
        "held_object": [s.held_object for s in states],
    }


def _label_to_dict(label: Optional[IntentLabel]) -> Optional[dict]:
    if label is None:
        return None
    return {"action": label.action.value, "target": label.target, "hand": label.hand.value}


def _label_from_dict(d: Optional[dict]) -> Optional[IntentLabel]:
    if d is None:
        return None
    return IntentLabel(action=Action(d["action"]), target=d["target"], hand=Hand(d["hand"]))


def sequence_to_record(seq: Sequence) -> dict:
    return {
        "user_id": seq.user_id,
        "block": seq.block,
        "trial": seq.trial,
        "label": _label_to_dict(seq.label),
        "phases": [
            {
                "name": p.name,
                "hand": p.hand.value,
                "label": _label_to_dict(p.label),
                "start": p.start,
                "end": p.end,
            }
            for p in seq.phases
        ],
        "frames": {
            "t": [f.t for f in seq.frames],
            "gaze_dir": [f.gaze_dir.tolist() for f in seq.frames],
            "left": _hand_to_dict(seq.frames, Hand.LEFT),
            "right": _hand_to_dict(seq.frames, Hand.RIGHT),
        },
    }


def _hand_states(d: dict, n: int) -> list[HandState]:
    for key in ("position", "velocity", "orientation", "trigger", "held_object"):
        if len(d[key]) != n:
            raise DatasetError(f"hand field {key!r} length {len(d[key])} != frame count {n}")
    return [
        HandState(
            position=d["position"][i],
            velocity=d["velocity"][i],
            orientation=d["orientation"][i],
            trigger=bool(d["trigger"][i]),
            held_object=d["held_object"][i],
        )
        for i in range(n)
    ]


def sequence_from_record(rec: dict) -> Sequence:
    fr = rec["frames"]
    n = len(fr["t"])
    left = _hand_states(fr["left"], n)
    right = _hand_states(fr["right"], n)
    frames = tuple(
        Frame(t=fr["t"][i], gaze_dir=fr["gaze_dir"][i], left=left[i], right=right[i])
        for i in range(n)
    )
    label = _label_from_dict(rec["label"])
    if label is None:
        raise DatasetError("sequence record is missing its label")
    phases = tuple(
        PhaseSegment(
            name=p["name"],
            hand=Hand(p["hand"]),
            label=_label_from_dict(p["label"]),
            start=p["start"],
            end=p["end"],
        )
        for p in rec.get("phases", [])
    )
    return Sequence(
        frames=frames,
        label=label,
        user_id=rec["user_id"],
        block=rec["block"],
        trial=rec["trial"],
        phases=phases,
    )


def save_dataset(
    path,
    sequences: Iterable[Sequence],
    rate_hz: float = 120.0,
    scene: Optional[Scene] = None,
) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "rate_hz": rate_hz,
        "scene_hash": scene_hash(scene) if scene is not None else "",
    }
    with _open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for seq in sequences:
            fh.write(json.dumps(sequence_to_record(seq)) + "\n")


def load_dataset(path, validate: bool = True) -> list[Sequence]:
    """Load sequences, rejecting malformed records with their line number."""
    sequences: list[Sequence] = []
    with _open(path, "r") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise DatasetError("empty file: missing header record")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"line 1: malformed header: {e}") from e
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise DatasetError(
                f"format_version {version!r} not supported (expected {FORMAT_VERSION})"
            )
        rate_hz = float(header.get("rate_hz", 120.0))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                seq = sequence_from_record(rec)
            except (DatasetError, KeyError, TypeError, ValueError, IndexError) as e:
                raise DatasetError(f"line {lineno}: malformed record: {e}") from e
            if validate:
                violations = validate_sequence(seq, rate_hz=rate_hz)
                if violations:
                    raise DatasetError(f"line {lineno}: invariant violation: {violations[0]}")
            sequences.append(seq)
    return sequences


def load_header(path) -> dict:
    with _open(path, "r") as fh:
        line = fh.readline()
    if not line.strip():
        raise DatasetError("empty file: missing header record")
    return json.loads(line)
