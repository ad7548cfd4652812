"""Acceptance suite: every release criterion with its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. The end-to-end benchmark (10 users x 1440 synthetic trials,
5-fold by-user validation plus feature ablations) runs once as a session
fixture; expect roughly ten minutes on two cores.
"""

import itertools
import time
from types import SimpleNamespace

import numpy as np
import pytest

from gazeintent.aoi import AoiConfig, aoi_likelihoods, aoi_raw_masses
from gazeintent.engine import (
    BimanualKind,
    EngineConfig,
    HandIntentEstimate,
    IntentEngine,
    combine_bimanual,
    replay,
)
from gazeintent.evaluation import (
    BY_HAND,
    BY_USER,
    cross_validate,
    precompute_features,
    train_models,
)
from gazeintent.features import window_length
from gazeintent.geom import angle_between, unit
from gazeintent.ghmm import WindowStatus, _log_emissions, fit, log_likelihood, sample
from gazeintent.scene import (
    Action,
    BoxGeom,
    CylinderGeom,
    DiscGeom,
    Hand,
    HandState,
    ObjectKind,
    Pose,
    Scene,
    SceneObject,
)
from gazeintent.sim import generate_dataset
from gazeintent.tpa import ApproachPoint, ApproachKind, bhattacharyya, hobby_path, softmax_neg

pytestmark = pytest.mark.acceptance


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Shared full-scale benchmark


@pytest.fixture(scope="session")
def benchmark(scene):
    t0 = time.perf_counter()
    data = generate_dataset(scene, n_users=10, trials_per_block=36, master_seed=0)
    feats = precompute_features(scene, data, n_jobs=2)
    full_user = cross_validate(data, scene, split=BY_USER, feats=feats, seed=0)
    core_runtime = time.perf_counter() - t0
    aoi_gs = cross_validate(
        data, scene, split=BY_USER, features=frozenset(("AOI", "GS")), feats=feats, seed=0
    )
    tpa_gs = cross_validate(
        data, scene, split=BY_USER, features=frozenset(("TPA", "GS")), feats=feats, seed=0
    )
    by_hand = cross_validate(data, scene, split=BY_HAND, feats=feats, seed=0)
    models = train_models(scene, data, feats, indices=list(range(len(data))), seed=0, include_transfer=True)
    return SimpleNamespace(
        data=data,
        feats=feats,
        full_user=full_user,
        aoi_gs=aoi_gs,
        tpa_gs=tpa_gs,
        by_hand=by_hand,
        models=models,
        core_runtime_s=core_runtime,
    )


# ---------------------------------------------------------------------------
# Math-core oracles


def _closed_form_bhattacharyya(mu1, S1, mu2, S2):
    sbar = (np.asarray(S1) + np.asarray(S2)) / 2.0
    d = np.asarray(mu1, dtype=float) - np.asarray(mu2, dtype=float)
    term1 = 0.125 * d @ np.linalg.inv(sbar) @ d
    term2 = 0.5 * np.log(np.linalg.det(sbar) / np.sqrt(np.linalg.det(S1) * np.linalg.det(S2)))
    return term1 + term2


def test_bhattacharyya_closed_form_suite():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(25):
        d = int(rng.integers(1, 6))
        mu1, mu2 = rng.normal(size=d), rng.normal(size=d)
        A1, A2 = rng.normal(size=(d, d)), rng.normal(size=(d, d))
        S1 = A1 @ A1.T + 0.1 * d * np.eye(d)
        S2 = A2 @ A2.T + 0.1 * d * np.eye(d)
        got = bhattacharyya(mu1, S1, mu2, S2)
        want = _closed_form_bhattacharyya(mu1, S1, mu2, S2)
        worst = max(worst, abs(got - want))
    identity = abs(bhattacharyya(mu1, S1, mu1, S1))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and identity < 1e-12 and elapsed < 1.0
    _report(
        "bhattacharyya closed-form suite",
        ok,
        f"25 pairs, worst |delta|={worst:.2e}, identity={identity:.1e}, {elapsed:.2f}s",
    )


def _brute_force_loglik(model, window):
    logb = _log_emissions(model, np.asarray(window, dtype=float))
    T, K = logb.shape
    log_pi = np.log(model.pi)
    log_a = np.log(model.trans)
    total = -np.inf
    for path in itertools.product(range(K), repeat=T):
        lp = log_pi[path[0]] + logb[0, path[0]]
        for t in range(1, T):
            lp += log_a[path[t - 1], path[t]] + logb[t, path[t]]
        total = np.logaddexp(total, lp)
    return total


def _random_ghmm(rng, K, D):
    pi = rng.uniform(0.2, 1.0, size=K)
    pi /= pi.sum()
    trans = rng.uniform(0.2, 1.0, size=(K, K))
    trans /= trans.sum(axis=1, keepdims=True)
    from gazeintent.ghmm import GhmmModel

    return GhmmModel(
        pi=pi,
        trans=trans,
        means=rng.normal(0, 2.0, size=(K, D)),
        variances=rng.uniform(0.2, 1.5, size=(K, D)),
    )


def test_forward_algorithm_oracle():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        K = int(rng.integers(2, 4))
        T = int(rng.integers(2, 6))
        model = _random_ghmm(rng, K, 3)
        window = rng.normal(size=(T, 3))
        got = log_likelihood(model, window)
        want = _brute_force_loglik(model, window)
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 5.0
    _report(
        "forward-algorithm oracle",
        ok,
        f"50 models (K in 2..3, T in 2..5), worst |delta|={worst:.2e}, {elapsed:.2f}s",
    )


def test_em_monotonicity():
    rng = np.random.default_rng(11)
    worst_drop = 0.0
    for _ in range(20):
        K = int(rng.integers(2, 5))
        seqs = [
            rng.normal(rng.normal(0, 1), 1.2, size=(int(rng.integers(10, 40)), 3))
            for _ in range(4)
        ]
        model = fit(seqs, K=K, max_iter=12, tol=0.0, seed=int(rng.integers(10_000)), n_restarts=2)
        history = np.asarray(model.metadata["loglik_history"])
        worst_drop = min(worst_drop, float(np.diff(history).min()))
    ok = worst_drop >= -1e-8
    _report("EM monotonicity", ok, f"20 datasets, worst per-iteration drop={worst_drop:.2e}")


# ---------------------------------------------------------------------------
# AOI properties


def _lone_scene(objects, eye=(0.0, -1.0, 0.0)):
    from gazeintent.geom import look_rotation

    vp = Pose(position=eye, orientation=look_rotation((0.0, 1.0, 0.0)))
    return Scene(objects=tuple(objects), viewpoint=vp)


def test_aoi_properties(scene):
    eye = scene.viewpoint.position
    # normalization on gazes at several objects
    norm_err = 0.0
    for target in ("a1", "a4", "b2"):
        v = aoi_likelihoods(scene, scene.viewpoint, unit(scene.object(target).center - eye))
        norm_err = max(norm_err, abs(sum(v.values()) - 1.0))

    # symmetry: identical cylinders 2 degrees either side of the gaze
    off = np.tan(np.deg2rad(2.0))
    sym_scene = _lone_scene(
        [
            SceneObject("L", ObjectKind.CYLINDER, Pose(position=(-off, 0.0, -0.1)), CylinderGeom(0.05, 0.2)),
            SceneObject("R", ObjectKind.CYLINDER, Pose(position=(off, 0.0, -0.1)), CylinderGeom(0.05, 0.2)),
        ]
    )
    sv = aoi_likelihoods(sym_scene, sym_scene.viewpoint, np.array([0.0, 1.0, 0.0]))
    sym_err = abs(sv["L"] - sv["R"])

    # occlusion monotonicity over 100 random occluders
    rng = np.random.default_rng(3)
    target = SceneObject("t", ObjectKind.CYLINDER, Pose(position=(0.0, 0.5, -0.1)), CylinderGeom(0.05, 0.2))
    base = _lone_scene([target])
    g = np.array([0.0, 1.0, 0.0])
    base_mass = aoi_raw_masses(base, base.viewpoint, g)["t"]
    monotone = True
    for _ in range(100):
        frac = rng.uniform(0.2, 0.8)
        lateral = rng.uniform(-0.06, 0.06, size=2)
        pos = np.array([lateral[0], -1.0 + frac * 1.5, lateral[1] - 0.1])
        kind = rng.integers(0, 3)
        if kind == 0:
            occ = SceneObject("o", ObjectKind.CYLINDER, Pose(position=pos), CylinderGeom(rng.uniform(0.01, 0.06), 0.2))
        elif kind == 1:
            occ = SceneObject("o", ObjectKind.COASTER, Pose(position=pos), DiscGeom(rng.uniform(0.02, 0.08)))
        else:
            occ = SceneObject("o", ObjectKind.GRIPPER, Pose(position=pos), BoxGeom((0.06, 0.06, 0.08)))
        occluded = _lone_scene([target, occ])
        m = aoi_raw_masses(occluded, occluded.viewpoint, g)["t"]
        if m > base_mass + 1e-12:
            monotone = False
            break

    # resolution convergence at doubled raster density
    conv_err = 0.0
    for target in ("a3", "b1"):
        g2 = unit(scene.object(target).center - eye)
        v1 = aoi_likelihoods(scene, scene.viewpoint, g2, AoiConfig(cells_per_deg=10))
        v2 = aoi_likelihoods(scene, scene.viewpoint, g2, AoiConfig(cells_per_deg=20))
        conv_err = max(conv_err, max(abs(v1[k] - v2[k]) for k in v1))

    ok = norm_err < 1e-6 and sym_err < 1e-6 and monotone and conv_err < 1e-3
    _report(
        "AOI properties",
        ok,
        f"normalization err={norm_err:.1e}, symmetry err={sym_err:.1e}, "
        f"occlusion monotone over 100 occluders={monotone}, convergence err={conv_err:.1e}",
    )


# ---------------------------------------------------------------------------
# Trajectory core


def test_hobby_path_suite():
    rng = np.random.default_rng(5)
    endpoint_err = 0.0
    tangent_err = 0.0
    for _ in range(100):
        p0, p1 = rng.normal(size=3), rng.normal(size=3)
        d0, d1 = unit(rng.normal(size=3)), unit(rng.normal(size=3))
        ap = ApproachPoint(location=p1, direction=d1, kind=ApproachKind.TOP_DOWN)
        path = hobby_path(p0, d0, ap)
        endpoint_err = max(
            endpoint_err,
            float(np.abs(path.means[0] - p0).max()),
            float(np.abs(path.means[-1] - p1).max()),
        )
        tangent_err = max(
            tangent_err,
            angle_between(path.velocities[0], d0),
            angle_between(path.velocities[-1], d1),
        )
    collinear_err = 0.0
    for _ in range(30):
        p0, p1 = rng.normal(size=3), rng.normal(size=3)
        chord = unit(p1 - p0)
        ap = ApproachPoint(location=p1, direction=chord, kind=ApproachKind.TOP_DOWN)
        path = hobby_path(p0, chord, ap)
        rel = path.means - p0
        offset = rel - (rel @ chord)[:, None] * chord[None, :]
        collinear_err = max(collinear_err, float(np.abs(offset).max()))
    ok = endpoint_err < 1e-12 and tangent_err < 1e-6 and collinear_err < 1e-9
    _report(
        "Hobby path suite",
        ok,
        f"100 configs: endpoint err={endpoint_err:.1e}, tangent err={tangent_err:.2e} rad, "
        f"collinear offset={collinear_err:.1e}",
    )


def test_tpa_softmax_criteria():
    rng = np.random.default_rng(9)
    sum_err = 0.0
    for _ in range(20):
        z = rng.normal(size=13)
        p = softmax_neg(z, 0.05)
        sum_err = max(sum_err, abs(p.sum() - 1.0))
    z = np.full(13, 4.0)
    z[6] = 3.5  # winner leads by 0.5
    winner = softmax_neg(z, 0.05)[6]
    ok = sum_err < 1e-6 and winner >= 0.999
    _report(
        "TPA softmax",
        ok,
        f"sum err={sum_err:.1e}, winner with 0.5 z-gap at T=0.05: {winner:.5f}",
    )


# ---------------------------------------------------------------------------
# End-to-end benchmark criteria


def test_end_to_end_benchmark(benchmark):
    f1 = benchmark.full_user.overall_f1
    pred = benchmark.full_user.predictability
    runtime_min = benchmark.core_runtime_s / 60.0
    ok = f1 >= 0.75 and pred >= 0.55 and runtime_min < 15.0
    _report(
        "end-to-end synthetic benchmark",
        ok,
        f"macro F1={f1:.3f} (>=0.75), predictability={pred:.3f} (>=0.55), "
        f"runtime={runtime_min:.1f} min (<15)",
    )


def test_qualitative_orderings(benchmark):
    f1_aoi = benchmark.aoi_gs.overall_f1
    f1_tpa = benchmark.tpa_gs.overall_f1
    C = benchmark.full_user.confusion
    cross_mass = float(C[:6, 6:].sum() + C[6:, :6].sum())
    e = benchmark.full_user.earliness
    place_early = float(e.place_predictability[0])
    pick_early = float(e.pick_predictability[0])
    hand_gap = abs(benchmark.by_hand.overall_f1 - benchmark.full_user.overall_f1)
    ok = (
        f1_aoi > f1_tpa
        and cross_mass == 0.0
        and place_early > pick_early
        and hand_gap <= 0.05
    )
    _report(
        "qualitative orderings",
        ok,
        f"F1(AOI+GS)={f1_aoi:.3f} > F1(TPA+GS)={f1_tpa:.3f}; "
        f"pick/place confusion mass={cross_mass:.1e}; "
        f"place pred@-900={place_early:.3f} > pick pred@-900={pick_early:.3f}; "
        f"|by-hand - by-user| F1 gap={hand_gap:.3f} (<=0.05)",
    )


# ---------------------------------------------------------------------------
# Bimanual rules


def _rule_oracle(lp, rp, l_held, r_held):
    """Independent restatement of the combination rules with precedence."""
    if lp is None or rp is None:
        return "independent"
    l_act, l_tgt = lp
    r_act, r_tgt = rp
    if l_act is Action.PLACE and l_tgt == "handR" and r_act is Action.PICK and l_held == r_tgt and l_held:
        return "hand_over_LR"
    if r_act is Action.PLACE and r_tgt == "handL" and l_act is Action.PICK and r_held == l_tgt and r_held:
        return "hand_over_RL"
    if l_act is r_act is Action.PLACE and l_tgt == r_tgt and l_held == r_held and l_held:
        return "multihand_place"
    if l_act is r_act is Action.PICK and l_tgt == r_tgt:
        return "multihand_pick"
    return "independent"


def _estimate(hand, prediction):
    return HandIntentEstimate(
        hand=hand, t=0.0, prediction=prediction, scores={}, window_status=WindowStatus.OK
    )


def test_bimanual_rules(scene, benchmark):
    targets = list(scene.pick_ids) + list(scene.place_ids)
    preds = [None]
    preds += [(Action.PICK, t) for t in targets]
    preds += [(Action.PLACE, t) for t in targets + ["handL", "handR"]]
    helds = [None, "a0", "a3"]
    mismatches = 0
    checked = 0
    for lp in preds:
        for rp in preds:
            for l_held in helds:
                for r_held in helds:
                    out = combine_bimanual(
                        _estimate(Hand.LEFT, lp), _estimate(Hand.RIGHT, rp), l_held, r_held
                    )
                    want = _rule_oracle(lp, rp, l_held, r_held)
                    got = out.kind.value
                    if want.startswith("hand_over"):
                        direction = "LR" if out.from_hand is Hand.LEFT else "RL"
                        got = f"hand_over_{direction}" if out.kind is BimanualKind.HAND_OVER else got
                    checked += 1
                    if got != want:
                        mismatches += 1

    # handover recognition on synthetic trials
    handovers = [s for s in benchmark.data if s.block.startswith("handover")][:20]
    engine = IntentEngine(scene, benchmark.models)
    good = 0
    confident_both = 0
    for seq in handovers:
        engine.reset()
        transfer = next(p for p in seq.phases if p.name == "transfer")
        for i, frame in enumerate(seq.frames):
            left, right, bi = engine.step_bimanual(frame)
            if transfer.start <= i < transfer.end and left.confident and right.confident:
                confident_both += 1
                if bi.kind is BimanualKind.HAND_OVER and bi.from_hand is transfer.hand:
                    good += 1
    frac = good / confident_both if confident_both else 0.0
    ok = mismatches == 0 and confident_both > 0 and frac >= 0.9
    _report(
        "bimanual rules",
        ok,
        f"truth table: {checked} combinations, {mismatches} mismatches; "
        f"handover direction correct in {frac:.1%} of {confident_both} confident transfer steps (>=90%)",
    )


# ---------------------------------------------------------------------------
# Runtime and service equivalence


def test_realtime_budget(scene, benchmark):
    engine = IntentEngine(scene, benchmark.models)
    seq = benchmark.data[0]
    window = window_length(0.45, 120.0)
    times = []
    for i, frame in enumerate(seq.frames):
        t0 = time.perf_counter()
        engine.step_bimanual(frame)
        if i >= window:  # steady state includes scoring both hands
            times.append(time.perf_counter() - t0)
    mean_ms = float(np.mean(times) * 1e3)
    ok = mean_ms < 8.0
    _report("real-time budget", ok, f"mean step={mean_ms:.2f} ms over {len(times)} frames (<8 ms)")


def test_replay_equivalence_service_vs_offline(scene, small_models, tmp_path, benchmark):
    from starlette.testclient import TestClient

    from gazeintent.datasets import load_dataset, save_dataset
    from gazeintent.service import bimanual_to_payload, create_app, estimate_to_payload

    def frame_payload(frame):
        def hand(h):
            return {
                "position": h.position.tolist(),
                "velocity": h.velocity.tolist(),
                "orientation": h.orientation.tolist(),
                "trigger": h.trigger,
                "held_object": h.held_object,
            }

        return {
            "type": "frame",
            "t": frame.t,
            "gaze_dir": frame.gaze_dir.tolist(),
            "left": hand(frame.left),
            "right": hand(frame.right),
        }

    trials = benchmark.data[:20]
    path = tmp_path / "stored.jsonl"
    save_dataset(path, trials, scene=scene)
    stored = load_dataset(path)

    app = create_app(scene, small_models)
    client = TestClient(app)
    engine = IntentEngine(scene, small_models)
    mismatches = 0
    with client.websocket_connect("/session") as ws:
        ws.receive_json()
        for seq in stored:
            ws.send_json({"type": "reset"})
            ws.receive_json()
            offline = replay(engine, seq.frames)
            for frame, (left, right, bi) in zip(seq.frames, offline):
                ws.send_json(frame_payload(frame))
                reply = ws.receive_json()
                if (
                    reply["left"] != estimate_to_payload(left)
                    or reply["right"] != estimate_to_payload(right)
                    or reply["bimanual"] != bimanual_to_payload(bi)
                ):
                    mismatches += 1
    ok = mismatches == 0
    _report(
        "replay equivalence",
        ok,
        f"20 stored trials through the service vs offline engine: {mismatches} mismatching steps",
    )
