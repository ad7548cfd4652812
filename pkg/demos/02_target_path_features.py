"""Hand-motion features: ideal trajectories and target likelihoods.

Places a hand mid-reach and walks through the machinery: approach points
per object, the Hobby-spline candidate trajectory, the constant-velocity
prediction of the hand path, and the softmax over weighted Bhattacharyya
path distances that turns all of it into 13 target likelihoods.
"""

import numpy as np

from gazeintent import build_tabletop_scene, hobby_path, predict_hand_path, tpa_vector
from gazeintent.geom import unit
from gazeintent.scene import HandState
from gazeintent.tpa import approach_points, path_distance, tpa_debug_payload

scene = build_tabletop_scene()
target = scene.object("a3")

# hand two thirds into a reach toward a3's top grasp point
start = np.array([0.28, 0.08, 0.10])
grasp = target.top + np.array([0.0, 0.0, 0.02])
pos = start + 0.66 * (grasp - start)
vel = 0.7 * unit(grasp - pos)
hand = HandState(position=pos, velocity=vel)
other = HandState(position=(-0.28, 0.08, 0.10), velocity=(0, 0, 0))

print(f"hand at {np.round(pos, 3)} moving {np.round(vel, 2)} m/s\n")
print("approach points for a3:")
for ap in approach_points(target, hand):
    print(f"  {ap.kind.value:<22} at {np.round(ap.location, 3)} facing {np.round(ap.direction, 2)}")

pred = predict_hand_path(hand)
best = min(
    (path_distance(pred, hobby_path(hand.position, hand.velocity, ap)), ap)
    for ap in approach_points(target, hand)
)
print(f"\nclosest ideal trajectory uses {best[1].kind.value} (weighted distance {best[0]:.2f})")

vec = tpa_vector(scene, hand, other, "handL")
print("\ntarget likelihoods (softmax at temperature 0.05):")
for k, v in sorted(vec.items(), key=lambda kv: -kv[1])[:5]:
    print(f"  {k:<6} {v:.4f}")

payload = tpa_debug_payload(scene, hand, other, "handL")
widths = {c["id"]: round(c["likelihood"], 3) for c in payload["candidates"][:3]}
print(f"\ndebug payload carries {len(payload['candidates'])} candidate polylines")
print("(the demo UI draws these with line width proportional to likelihood)")
