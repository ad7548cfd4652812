// Canvas drawing: 2.5D projection of the scene, cursors, AOI highlight,
// per-candidate score bars, trajectory overlays, and the intent banner.

import { Camera, worldToScreen } from "./projection.js";
import {
  DebugPayload,
  EstimateMessage,
  HandEstimate,
  SceneJson,
  SceneObjectJson,
  Vec3,
} from "./protocol.js";

const COLORS: Record<string, string> = {
  cylinder: "#4e8fd9",
  coaster: "#c9a227",
  gripper: "#9a66c7",
};

function circlePoints(center: Vec3, radius: number, z: number, n = 24): Vec3[] {
  const pts: Vec3[] = [];
  for (let i = 0; i < n; i++) {
    const a = (2 * Math.PI * i) / n;
    pts.push([center[0] + radius * Math.cos(a), center[1] + radius * Math.sin(a), z]);
  }
  return pts;
}

function tracePolygon(ctx: CanvasRenderingContext2D, cam: Camera, pts: Vec3[]): boolean {
  let started = false;
  for (const p of pts) {
    const s = worldToScreen(cam, p);
    if (!s) return false;
    if (!started) {
      ctx.moveTo(s[0], s[1]);
      started = true;
    } else {
      ctx.lineTo(s[0], s[1]);
    }
  }
  ctx.closePath();
  return started;
}

export function drawObject(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  obj: SceneObjectJson,
  highlight: number,
  overridePos?: Vec3
): void {
  const pos = overridePos ?? obj.position;
  ctx.beginPath();
  if (obj.geometry.type === "cylinder") {
    const { radius, height } = obj.geometry;
    tracePolygon(ctx, cam, [
      ...circlePoints(pos, radius, pos[2], 16),
      ...circlePoints(pos, radius, pos[2] + height, 16).reverse(),
    ]);
  } else if (obj.geometry.type === "disc") {
    tracePolygon(ctx, cam, circlePoints(pos, obj.geometry.radius, pos[2] + 0.002));
  } else {
    const [ex, ey, ez] = obj.geometry.extents;
    tracePolygon(ctx, cam, [
      [pos[0] - ex / 2, pos[1] - ey / 2, pos[2] - ez / 2],
      [pos[0] + ex / 2, pos[1] - ey / 2, pos[2] - ez / 2],
      [pos[0] + ex / 2, pos[1] - ey / 2, pos[2] + ez / 2],
      [pos[0] - ex / 2, pos[1] - ey / 2, pos[2] + ez / 2],
    ]);
  }
  ctx.fillStyle = COLORS[obj.kind] ?? "#888";
  ctx.globalAlpha = 0.55 + 0.45 * Math.min(1, highlight);
  ctx.fill();
  ctx.globalAlpha = 1;
  if (highlight > 0.02) {
    ctx.strokeStyle = "#3ddc84";
    ctx.lineWidth = 2.5;
    ctx.stroke();
  }
  const anchor = worldToScreen(cam, [pos[0], pos[1], pos[2] + 0.02]);
  if (anchor) {
    ctx.fillStyle = "#eee";
    ctx.font = "11px monospace";
    ctx.fillText(obj.id + (highlight > 0.02 ? ` ${highlight.toFixed(2)}` : ""), anchor[0] - 8, anchor[1]);
  }
}

export function drawTrajectories(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  debug: DebugPayload,
  hand: "left" | "right"
): void {
  const paths = debug.paths[hand];
  if (!paths) return;
  for (const cand of paths.candidates) {
    ctx.beginPath();
    let ok = true;
    cand.polyline.forEach((p, i) => {
      const s = worldToScreen(cam, p);
      if (!s) {
        ok = false;
        return;
      }
      if (i === 0) ctx.moveTo(s[0], s[1]);
      else ctx.lineTo(s[0], s[1]);
    });
    if (!ok) continue;
    ctx.strokeStyle = cand.likelihood > 0.5 ? "#3ddc84" : "#d05ce3";
    ctx.lineWidth = 0.5 + 4 * cand.likelihood;
    ctx.globalAlpha = 0.35 + 0.65 * cand.likelihood;
    ctx.stroke();
    ctx.globalAlpha = 1;
  }
}

export function drawScoreBars(
  ctx: CanvasRenderingContext2D,
  est: HandEstimate,
  x: number,
  y: number,
  title: string
): void {
  ctx.fillStyle = "#ccc";
  ctx.font = "12px monospace";
  ctx.fillText(title, x, y - 6);
  const entries = Object.entries(est.scores).sort(([a], [b]) => a.localeCompare(b));
  const lo = -2500;
  const hi = 1500;
  entries.forEach(([key, score], i) => {
    const frac = Math.max(0, Math.min(1, (score - lo) / (hi - lo)));
    const confident = score > 0;
    const best = est.prediction && key === `${est.prediction.action}:${est.prediction.target}`;
    ctx.fillStyle = best ? "#3ddc84" : confident ? "#7fc97f" : "#555";
    ctx.fillRect(x, y + i * 13, 90 * frac, 10);
    ctx.strokeStyle = "#333";
    ctx.strokeRect(x, y + i * 13, 90, 10);
    ctx.fillStyle = "#bbb";
    ctx.fillText(key, x + 96, y + i * 13 + 9);
  });
}

export function banner(est: EstimateMessage | null): string {
  if (!est) return "connecting ...";
  if (est.left.window_status === "warming_up" || est.right.window_status === "warming_up") {
    return "collecting window ...";
  }
  const bi = est.bimanual;
  if (bi.kind === "hand_over") {
    return `HAND OVER ${bi.object_id ?? "?"}: ${bi.from_hand} -> ${bi.to_hand}`;
  }
  if (bi.kind === "multihand_pick") return `MULTIHAND PICK ${bi.target}`;
  if (bi.kind === "multihand_place") return `MULTIHAND PLACE ${bi.target}`;
  const parts: string[] = [];
  for (const est1 of [est.left, est.right]) {
    if (est1.prediction) {
      parts.push(`${est1.hand}: ${est1.prediction.action.toUpperCase()} ${est1.prediction.target}`);
    }
  }
  return parts.length ? parts.join("   ") : "no confident intention";
}

export function sceneObjectById(scene: SceneJson, id: string): SceneObjectJson | undefined {
  return scene.objects.find((o) => o.id === id);
}
