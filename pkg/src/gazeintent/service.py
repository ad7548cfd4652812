"""WebSocket streaming service around the intent engine.

One engine instance per connected session; the client sends frame
messages at its own cadence and receives both per-hand estimates plus
the combined bimanual intent per frame. JSON message schemas are
documented in docs/protocol.md and versioned via ``protocol_version``.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .datasets import scene_to_dict
from .engine import BimanualIntent, EngineConfig, HandIntentEstimate, IntentEngine
from .ghmm import GhmmModel
from .scene import Action, Frame, Hand, HandState, Scene

PROTOCOL_VERSION = 1
MAX_RATE_HZ = 240.0


class ProtocolError(ValueError):
    pass


def _hand_from_payload(d: dict, key: str) -> HandState:
    try:
        h = d[key]
        return HandState(
            position=h["position"],
            velocity=h["velocity"],
            orientation=h.get("orientation", (0.0, 0.0, 0.0, 1.0)),
            trigger=bool(h.get("trigger", False)),
            held_object=h.get("held_object"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"bad hand state {key!r}: {e}") from e


def frame_from_payload(d: dict) -> Frame:
    try:
        t = float(d["t"])
        gaze = np.asarray(d["gaze_dir"], dtype=float).reshape(3)
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"bad frame: {e}") from e
    norm = float(np.linalg.norm(gaze))
    if not 0.9 < norm < 1.1:
        raise ProtocolError("gaze_dir must be (close to) unit length")
    return Frame(
        t=t,
        gaze_dir=gaze / norm,
        left=_hand_from_payload(d, "left"),
        right=_hand_from_payload(d, "right"),
    )


def estimate_to_payload(est: HandIntentEstimate) -> dict:
    return {
        "hand": est.hand.value,
        "t": est.t,
        "window_status": est.window_status.value,
        "prediction": (
            None
            if est.prediction is None
            else {"action": est.prediction[0].value, "target": est.prediction[1]}
        ),
        "scores": {f"{a.value}:{target}": s for (a, target), s in est.scores.items()},
    }


def bimanual_to_payload(bi: BimanualIntent) -> dict:
    return {
        "kind": bi.kind.value,
        "target": bi.target,
        "from_hand": bi.from_hand.value if bi.from_hand else None,
        "to_hand": bi.to_hand.value if bi.to_hand else None,
        "object_id": bi.object_id,
    }


def create_app(
    scene: Scene,
    models: Mapping[Action, GhmmModel],
    config: EngineConfig = EngineConfig(),
    ui_dir: Optional[str] = None,
) -> FastAPI:
    """Service app; sessions are independent, models are shared read-only."""
    app = FastAPI(title="gazeintent", version="0.1.0")
    welcome = {
        "type": "welcome",
        "protocol_version": PROTOCOL_VERSION,
        "scene": scene_to_dict(scene),
        "dt": config.dt,
        "rate_hz": config.rate_hz,
        "threshold": config.threshold,
    }

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "protocol_version": PROTOCOL_VERSION}

    @app.websocket("/session")
    async def session(ws: WebSocket) -> None:
        await ws.accept()
        engine = IntentEngine(scene, models, config)
        debug = False
        last_t: Optional[float] = None
        await ws.send_json(welcome)
        while True:
            try:
                payload = await ws.receive_json()
            except WebSocketDisconnect:
                return
            except Exception:
                await ws.send_json({"type": "error", "message": "message is not valid JSON"})
                continue
            kind = payload.get("type") if isinstance(payload, dict) else None
            if kind == "frame":
                try:
                    frame = frame_from_payload(payload)
                except ProtocolError as e:
                    await ws.send_json({"type": "error", "message": str(e)})
                    continue
                if last_t is not None and frame.t - last_t < 1.0 / MAX_RATE_HZ:
                    await ws.send_json(
                        {"type": "notice", "reason": "rate_limit", "dropped_t": frame.t}
                    )
                    continue
                last_t = frame.t
                left, right, bimanual = engine.step_bimanual(frame)
                reply = {
                    "type": "estimate",
                    "t": frame.t,
                    "left": estimate_to_payload(left),
                    "right": estimate_to_payload(right),
                    "bimanual": bimanual_to_payload(bimanual),
                }
                if debug and engine.last_debug is not None:
                    reply["debug"] = engine.last_debug
                await ws.send_json(reply)
            elif kind == "set_debug":
                debug = bool(payload.get("enabled", False))
                engine.config = EngineConfig(
                    dt=config.dt,
                    rate_hz=config.rate_hz,
                    threshold=config.threshold,
                    aoi=config.aoi,
                    tpa=config.tpa,
                    debug=debug,
                )
                await ws.send_json({"type": "ack", "debug": debug})
            elif kind == "reset":
                engine.reset()
                last_t = None
                await ws.send_json({"type": "ack", "reset": True})
            else:
                await ws.send_json(
                    {"type": "error", "message": f"unknown message type {kind!r}"}
                )

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(
    scene: Scene,
    models: Mapping[Action, GhmmModel],
    config: EngineConfig = EngineConfig(),
    host: str = "127.0.0.1",
    port: int = 8733,
    ui_dir: Optional[str] = None,
) -> None:
    import uvicorn

    app = create_app(scene, models, config, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
