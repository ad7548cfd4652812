"""Command-line entry points: data generation, training, evaluation
studies, offline replay, and the streaming service."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .aoi import AoiConfig
from .datasets import load_dataset, save_dataset, scene_hash
from .engine import EngineConfig, IntentEngine, replay
from .evaluation import (
    BY_HAND,
    BY_USER,
    DEFAULT_ABLATION_SETS,
    FULL_FEATURES,
    ablate,
    bundle_to_dict,
    cross_validate,
    earliness_curves,
    feature_set,
    format_ablation_table,
    format_bundle,
    precompute_features,
    sweep_window,
    train_models,
)
from .ghmm import load_model, save_model
from .scene import Action, build_tabletop_scene
from .service import bimanual_to_payload, estimate_to_payload
from .sim import ALL_MODES, TrialMode, generate_dataset
from .tpa import TpaConfig


@dataclass
class RunConfig:
    """File-configurable defaults; command-line flags override."""

    dataset: Optional[str] = None
    models_dir: Optional[str] = None
    dt: float = 0.45
    rate_hz: float = 120.0
    features: str = "AOI,TPA,GS"
    seed: int = 0
    n_users: int = 10
    trials_per_block: int = 36
    jobs: int = 1
    k_states: int = 4
    n_restarts: int = 5
    max_iter: int = 30
    host: str = "127.0.0.1"
    port: int = 8733

    @classmethod
    def from_file(cls, path: Optional[str]) -> "RunConfig":
        cfg = cls()
        if path:
            data = json.loads(Path(path).read_text())
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise SystemExit(f"unknown config keys: {sorted(unknown)}")
            for k, v in data.items():
                setattr(cfg, k, v)
        return cfg

    def merged(self, args: argparse.Namespace) -> "RunConfig":
        for f in fields(self):
            v = getattr(args, f.name, None)
            if v is not None:
                setattr(self, f.name, v)
        return self


def _atomic_write(path: Path, writer) -> None:
    """Write via a temp file; nothing is left behind on failure."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _load_models(models_dir: str):
    d = Path(models_dir)
    models = {}
    for action in Action:
        path = d / f"{action.value}_model.json"
        if not path.exists():
            raise SystemExit(f"missing model file {path}")
        models[action] = load_model(path)
    return models


def _feature_arg(text: str) -> frozenset:
    try:
        return feature_set(t.strip() for t in text.split(",") if t.strip())
    except ValueError as e:
        raise SystemExit(str(e))


def _write_report(bundle, out_prefix: str) -> None:
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(
        prefix.with_suffix(".json"),
        lambda p: p.write_text(json.dumps(bundle_to_dict(bundle), indent=1)),
    )
    _atomic_write(prefix.with_suffix(".txt"), lambda p: p.write_text(format_bundle(bundle) + "\n"))
    print(format_bundle(bundle))


def cmd_gen_data(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    modes = ALL_MODES if args.modes is None else tuple(TrialMode(m) for m in args.modes.split(","))
    data = generate_dataset(
        scene,
        n_users=cfg.n_users,
        modes=modes,
        trials_per_block=cfg.trials_per_block,
        master_seed=cfg.seed,
        rate_hz=cfg.rate_hz,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, lambda p: save_dataset(p, data, rate_hz=cfg.rate_hz, scene=scene))
    print(f"wrote {len(data)} trials to {out} (scene {scene_hash(scene)})")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    feats = precompute_features(
        scene, data, dt=cfg.dt, rate_hz=cfg.rate_hz, n_jobs=cfg.jobs
    )
    models = train_models(
        scene,
        data,
        feats,
        indices=list(range(len(data))),
        features=_feature_arg(cfg.features),
        K=cfg.k_states,
        seed=cfg.seed,
        n_restarts=cfg.n_restarts,
        max_iter=cfg.max_iter,
        include_transfer=True,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for action, model in models.items():
        model.metadata["dataset"] = str(cfg.dataset)
        path = out / f"{action.value}_model.json"
        _atomic_write(path, lambda p, m=model: save_model(m, p))
        print(f"wrote {path} (final loglik {model.metadata['loglik_history'][-1]:.1f})")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    split = BY_USER if args.split == "user" else BY_HAND
    bundle = cross_validate(
        data,
        scene,
        split=split,
        features=_feature_arg(cfg.features),
        dt=cfg.dt,
        rate_hz=cfg.rate_hz,
        seed=cfg.seed,
        n_jobs=cfg.jobs,
        K=cfg.k_states,
        n_restarts=cfg.n_restarts,
        max_iter=cfg.max_iter,
    )
    _write_report(bundle, args.out)
    return 0


def cmd_ablate(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    feats = precompute_features(scene, data, dt=cfg.dt, rate_hz=cfg.rate_hz, n_jobs=cfg.jobs)
    table = ablate(
        data,
        scene,
        sets=DEFAULT_ABLATION_SETS,
        dt=cfg.dt,
        seed=cfg.seed,
        feats=feats,
        K=cfg.k_states,
        n_restarts=cfg.n_restarts,
        max_iter=cfg.max_iter,
    )
    text = format_ablation_table(table)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {f"{k[0]}|{k[1]}": v for k, v in table.items()}
    _atomic_write(out.with_suffix(".json"), lambda p: p.write_text(json.dumps(payload, indent=1)))
    _atomic_write(out.with_suffix(".txt"), lambda p: p.write_text(text + "\n"))
    print(text)
    return 0


def cmd_sweep_window(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    dts = [float(x) for x in args.dts.split(",")]
    out = sweep_window(
        data, scene, dts=dts, seed=cfg.seed, n_jobs=cfg.jobs,
        K=cfg.k_states, max_iter=cfg.max_iter,
    )
    text = "\n".join(
        f"dt={row['dt']:.2f}  F1={row['overall_f1']:.3f}  predictability={row['predictability']:.3f}"
        for row in out
    )
    _atomic_write(Path(args.out), lambda p: p.write_text(json.dumps(out, indent=1)))
    print(text)
    return 0


def cmd_earliness(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    models = _load_models(cfg.models_dir)
    curves = earliness_curves(data, scene, models, dt=cfg.dt, rate_hz=cfg.rate_hz, n_jobs=cfg.jobs)
    payload = {
        "offsets_ms": curves.offsets_ms.tolist(),
        "pick_accuracy": curves.pick_accuracy.tolist(),
        "pick_predictability": curves.pick_predictability.tolist(),
        "place_accuracy": curves.place_accuracy.tolist(),
        "place_predictability": curves.place_predictability.tolist(),
    }
    _atomic_write(Path(args.out), lambda p: p.write_text(json.dumps(payload, indent=1)))
    print(json.dumps(payload, indent=1))
    return 0


def cmd_replay(cfg: RunConfig, args) -> int:
    scene = build_tabletop_scene()
    data = load_dataset(cfg.dataset)
    if not 0 <= args.trial < len(data):
        raise SystemExit(f"trial index {args.trial} out of range (0..{len(data) - 1})")
    models = _load_models(cfg.models_dir)
    engine = IntentEngine(
        scene, models, EngineConfig(dt=cfg.dt, rate_hz=cfg.rate_hz, debug=args.debug)
    )
    seq = data[args.trial]
    lines = []
    for left, right, bimanual in replay(engine, seq.frames):
        lines.append(
            json.dumps(
                {
                    "t": left.t,
                    "left": estimate_to_payload(left),
                    "right": estimate_to_payload(right),
                    "bimanual": bimanual_to_payload(bimanual),
                }
            )
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(Path(args.out), lambda p: p.write_text(text))
        print(f"wrote {len(lines)} estimate records to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(cfg: RunConfig, args) -> int:
    from .service import serve

    scene = build_tabletop_scene()
    models = _load_models(cfg.models_dir)
    serve(
        scene,
        models,
        EngineConfig(dt=cfg.dt, rate_hz=cfg.rate_hz),
        host=cfg.host,
        port=cfg.port,
        ui_dir=args.ui,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeintent",
        description="Gaze- and motion-based pick/place intention estimation",
    )
    parser.add_argument("--config", help="JSON file with RunConfig defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--rate-hz", dest="rate_hz", type=float, default=None)
        p.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--users", dest="n_users", type=int, default=None)
    p.add_argument("--trials-per-block", dest="trials_per_block", type=int, default=None)
    p.add_argument("--modes", help="comma list of right_only,left_only,handover_rl,handover_lr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="fit the pick and place models")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--k", dest="k_states", type=int, default=None)
    p.add_argument("--restarts", dest="n_restarts", type=int, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated metrics")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--split", choices=("user", "hand"), default="user")
    p.add_argument("--features", default=None)
    p.add_argument("--restarts", dest="n_restarts", type=int, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--out", default="eval_report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="feature-combination study")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--restarts", dest="n_restarts", type=int, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--out", default="ablation")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep-window", help="window-size study")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--dts", default="0.15,0.30,0.45,0.60,0.90")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--out", default="window_sweep.json")
    p.set_defaults(func=cmd_sweep_window)

    p = sub.add_parser("earliness", help="earliness curves for saved models")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--models-dir", dest="models_dir", required=True)
    p.add_argument("--out", default="earliness.json")
    p.set_defaults(func=cmd_earliness)

    p = sub.add_parser("replay", help="run the engine over one stored trial")
    common(p)
    p.add_argument("--data", dest="dataset", required=True)
    p.add_argument("--models-dir", dest="models_dir", required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--debug", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the streaming service")
    common(p)
    p.add_argument("--models-dir", dest="models_dir", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui", default=None, help="static directory for the demo UI")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config).merged(args)
        return args.func(cfg, args)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
