"""Train the two models on a small synthetic dataset and stream trials
through the live engine, including a handover recognized by the
rule-based bimanual combiner.

Takes a couple of minutes; scale n_users/trials_per_block up for real
numbers (the full study is demo 05 / the CLI).
"""

import numpy as np

from gazeintent import build_tabletop_scene
from gazeintent.engine import BimanualKind, IntentEngine
from gazeintent.evaluation import precompute_features, train_models
from gazeintent.sim import TrialMode, generate_dataset

scene = build_tabletop_scene()
print("simulating 2 users x 4 blocks x 4 trials ...")
data = generate_dataset(scene, n_users=2, trials_per_block=4, master_seed=3)
feats = precompute_features(scene, data, n_jobs=2)
models = train_models(
    scene, data, feats, indices=range(len(data)), seed=0, n_restarts=2, max_iter=20,
    include_transfer=True,  # live engines also learn the handover patterns
)
for action, m in models.items():
    print(f"  {action.value} model: trained on {m.metadata['n_sequences']} phases, "
          f"final loglik {m.metadata['loglik_history'][-1]:.0f}")

engine = IntentEngine(scene, models)
trial = data[0]
print(f"\nstreaming a {trial.block} trial (pick {trial.phases[0].label.target}, "
      f"place {trial.phases[-1].label.target}):")
last = None
for frame in trial.frames:
    left, right, bi = engine.step_bimanual(frame)
    est = left if trial.phases[0].hand.value == "left" else right
    state = est.prediction and f"{est.prediction[0].value} {est.prediction[1]}"
    if state != last:
        print(f"  t={frame.t:5.2f}s  {state or '(no confident prediction)'}")
        last = state

handover = next(s for s in data if s.block.startswith("handover"))
engine.reset()
print(f"\nstreaming a {handover.block} trial; watching the bimanual combiner:")
seen = set()
for i, frame in enumerate(handover.frames):
    left, right, bi = engine.step_bimanual(frame)
    if bi.kind is not BimanualKind.INDEPENDENT and bi.kind not in seen:
        seen.add(bi.kind)
        detail = bi.target or f"{bi.object_id} {bi.from_hand.value}->{bi.to_hand.value}"
        print(f"  t={frame.t:5.2f}s  {bi.kind.value}: {detail}")
if not seen:
    print("  (no bimanual intent fired; try more training data)")
