"""Synthetic eye-hand trials: what one pick-place-handover looks like.

Simulates a right-hand trial and a handover trial, prints their phase
timelines and gaze behavior, and round-trips a small dataset through the
line-delimited file format.
"""

from pathlib import Path

import numpy as np

from gazeintent import build_tabletop_scene, load_dataset, save_dataset
from gazeintent.geom import unit
from gazeintent.sim import TrialMode, TrialSpec, UserProfile, simulate_trial
from gazeintent.sim import _look_point  # demo-only peek at the fixation target

scene = build_tabletop_scene()
profile = UserProfile(seed=4)

for mode in (TrialMode.RIGHT_ONLY, TrialMode.HANDOVER_RL):
    seq = simulate_trial(scene, TrialSpec("a2", "b4", mode), profile)
    print(f"{mode.value}: {len(seq.frames)} frames at 120 Hz")
    for p in seq.phases:
        t0, t1 = seq.frames[p.start].t, seq.frames[min(p.end, len(seq.frames) - 1)].t
        label = f"{p.label.action.value} {p.label.target}" if p.label else "(bimanual transfer)"
        print(f"  {p.name:<9} {p.hand.value:<5} [{t0:5.2f}s .. {t1:5.2f}s]  {label}")
    # how early does gaze settle on the pick target?
    eye = scene.viewpoint.position
    want = unit(_look_point(scene, "a2") - eye)
    on_target = [float(f.gaze_dir @ want) > np.cos(np.deg2rad(2.5)) for f in seq.frames]
    press = seq.phases[0].end
    lead = next(
        (seq.frames[press].t - seq.frames[i].t for i in range(press - 1, -1, -1) if not on_target[i]),
        seq.frames[press].t,
    )
    print(f"  gaze settled on the pick target {lead:.2f}s before the grasp\n")

out = Path(__file__).with_name("demo_trials.jsonl.gz")
trials = [
    simulate_trial(scene, TrialSpec(f"a{i}", f"b{5 - i}"), profile, trial=i) for i in range(3)
]
save_dataset(out, trials, scene=scene)
again = load_dataset(out)
print(f"saved {len(trials)} trials to {out.name}; round-trip equal: {again == trials}")
