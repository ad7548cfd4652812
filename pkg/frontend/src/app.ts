// Browser wiring: pointer = gaze, keys = selected hand, space = grasp.

import {
  handPayload,
  initialInput,
  setGrasp,
  stepInput,
  toggleHand,
  InputState,
} from "./input.js";
import { Camera, makeCamera, screenToGaze, worldToScreen } from "./projection.js";
import { EstimateMessage, Vec3, WelcomeMessage, frameMessage } from "./protocol.js";
import { banner, drawObject, drawScoreBars, drawTrajectories } from "./render.js";
import { Session } from "./session.js";

const SEND_HZ = 60; // well under the 120 Hz cap

export function startApp(canvas: HTMLCanvasElement, statusEl: HTMLElement): void {
  const ctx = canvas.getContext("2d")!;
  const url = `ws://${location.host}/session`;
  const socket = new WebSocket(url);
  let session: Session | null = null;
  let cam: Camera | null = null;
  let input: InputState | null = null;
  let welcome: WelcomeMessage | null = null;
  let latest: EstimateMessage | null = null;
  let debugOn = false;
  let t = 0;

  socket.addEventListener("open", () => console.log(`connected to ${url}`));
  session = new Session(socket as never, {
    onWelcome: (msg) => {
      welcome = msg;
      cam = makeCamera(msg.scene.viewpoint.position, msg.scene.viewpoint.orientation, canvas.width, canvas.height);
      const rest = (id: string): Vec3 =>
        (msg.scene.objects.find((o) => o.id === id)?.position ?? [0, 0.1, 0.1]) as Vec3;
      input = initialInput(screenToGaze(cam, canvas.width / 2, canvas.height / 2), rest("handL"), rest("handR"));
    },
    onEstimate: (msg) => {
      latest = msg;
    },
    onError: (m) => console.log("server error:", m),
    onClose: () => {
      statusEl.textContent = "disconnected - reload to reconnect (fresh warm-up)";
    },
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (!cam || !input) return;
    const r = canvas.getBoundingClientRect();
    input.gaze = screenToGaze(cam, ev.clientX - r.left, ev.clientY - r.top);
  });
  window.addEventListener("keydown", (ev) => {
    if (!input) return;
    if (ev.key === "Tab") {
      ev.preventDefault();
      toggleHand(input);
      return;
    }
    if (ev.key === " ") {
      ev.preventDefault();
      setGrasp(input, input.controlled, true);
      return;
    }
    if (ev.key === "g") {
      debugOn = !debugOn;
      session?.setDebug(debugOn);
      return;
    }
    input.keys.add(ev.key);
  });
  window.addEventListener("keyup", (ev) => {
    if (!input) return;
    if (ev.key === " ") {
      setGrasp(input, input.controlled, false);
      return;
    }
    input.keys.delete(ev.key);
  });

  setInterval(() => {
    if (!session || !input || !welcome) return;
    stepInput(input, 1 / SEND_HZ);
    t += 1 / SEND_HZ;
    session.sendFrame(
      frameMessage(t, input.gaze, handPayload(input.hands.left), handPayload(input.hands.right))
    );
  }, 1000 / SEND_HZ);

  function draw(): void {
    requestAnimationFrame(draw);
    ctx.fillStyle = "#181c20";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (!welcome || !cam || !input) {
      ctx.fillStyle = "#ccc";
      ctx.fillText("waiting for the service ...", 20, 20);
      return;
    }
    const aoi = latest?.debug?.aoi ?? {};
    for (const obj of welcome.scene.objects) {
      let pos: Vec3 | undefined;
      if (obj.kind === "gripper") {
        pos = input.hands[obj.id === "handL" ? "left" : "right"].position;
      }
      drawObject(ctx, cam, obj, aoi[obj.id] ?? 0, pos);
    }
    if (debugOn && latest?.debug) {
      drawTrajectories(ctx, cam, latest.debug, input.controlled);
    }
    // cursors
    const gazePx: [number, number] = [0, 0];
    {
      const far: Vec3 = [
        cam.eye[0] + input.gaze[0] * 2,
        cam.eye[1] + input.gaze[1] * 2,
        cam.eye[2] + input.gaze[2] * 2,
      ];
      const s = worldToScreen(cam, far);
      if (s) {
        gazePx[0] = s[0];
        gazePx[1] = s[1];
        ctx.strokeStyle = "#ff6666";
        ctx.beginPath();
        ctx.arc(s[0], s[1], 10, 0, 2 * Math.PI);
        ctx.stroke();
      }
    }
    for (const name of ["left", "right"] as const) {
      const s = worldToScreen(cam, input.hands[name].position);
      if (!s) continue;
      const active = input.controlled === name;
      ctx.fillStyle = input.hands[name].trigger ? "#ffd166" : active ? "#d05ce3" : "#777";
      ctx.beginPath();
      ctx.arc(s[0], s[1], active ? 7 : 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#ccc";
      ctx.fillText(name === "left" ? "L" : "R", s[0] - 3, s[1] - 10);
    }
    if (latest) {
      drawScoreBars(ctx, latest.left, 12, 30, "left hand scores");
      drawScoreBars(ctx, latest.right, canvas.width - 220, 30, "right hand scores");
    }
    ctx.fillStyle = "#3ddc84";
    ctx.font = "16px monospace";
    ctx.fillText(banner(latest), 20, canvas.height - 16);
    statusEl.textContent =
      `controlling ${input.controlled} hand - Tab switch, WASD/arrows move, q/e up/down, ` +
      `space grasp, g debug overlay (${debugOn ? "on" : "off"})`;
  }
  draw();
}
