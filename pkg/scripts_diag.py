"""Per-user pick diagnosis: which profiles hurt cross-user pick F1."""
import numpy as np

import gazeintent as gi
from gazeintent.evaluation import (
    BY_USER, evaluate_phases, intent_classes, make_folds, metrics_from_records,
    precompute_features, train_models,
)
from gazeintent.sim import ProfileRanges, generate_dataset

scene = gi.build_tabletop_scene()
data = generate_dataset(scene, n_users=10, trials_per_block=36, master_seed=0)

# recover each user's profile draw
ranges = ProfileRanges()
profiles = {}
for user in range(10):
    rng = np.random.default_rng([0, user])
    profiles[user] = ranges.draw(rng, seed=user)

subset = [i for i, s in enumerate(data) if True]
feats = precompute_features(scene, data, n_jobs=2)
folds = make_folds(data, BY_USER)
classes = intent_classes(scene)
print("user eye_lead noise glance | pickF1 placeF1")
for train_idx, test_idx in folds[:5]:
    models = train_models(scene, data, feats, train_idx, seed=0)
    records = evaluate_phases(scene, data, feats, test_idx, models)
    for user in sorted({data[i].user_id for i in test_idx}):
        urec = [r for r in records if r.user_id == user]
        b = metrics_from_records(urec, classes)
        picks = [v for k, v in b.per_intent_f1.items() if k.startswith("pick")]
        places = [v for k, v in b.per_intent_f1.items() if k.startswith("place")]
        p = profiles[user]
        print(
            f"{user:4d} {p.eye_lead_s:8.3f} {p.gaze_noise_deg:5.2f} {p.distractor_glance_prob:6.2f} | "
            f"{np.nanmean(picks):6.3f} {np.nanmean(places):7.3f}"
        )
