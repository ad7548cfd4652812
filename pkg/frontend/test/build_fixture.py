"""Build (and cache) small trained models for the live UI test."""

import sys
from pathlib import Path

cache = Path(__file__).resolve().parent / ".cache"
cache.mkdir(exist_ok=True)
pick = cache / "pick_model.json"
place = cache / "place_model.json"
if pick.exists() and place.exists():
    print("cached")
    sys.exit(0)

from gazeintent import build_tabletop_scene
from gazeintent.evaluation import precompute_features, train_models
from gazeintent.ghmm import save_model
from gazeintent.sim import generate_dataset

scene = build_tabletop_scene()
data = generate_dataset(scene, n_users=2, trials_per_block=3, master_seed=21)
feats = precompute_features(scene, data, n_jobs=2)
models = train_models(
    scene, data, feats, indices=range(len(data)), seed=1, n_restarts=2, max_iter=20
)
for action, model in models.items():
    save_model(model, cache / f"{action.value}_model.json")
print("built")
