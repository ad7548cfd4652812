// Pinhole projection between the scene's world frame and the canvas.
// Camera convention matches the backend: identity orientation looks
// along +y with +z up; quaternions are (x, y, z, w).

import { Quat, Vec3 } from "./protocol.js";

export interface Camera {
  eye: Vec3;
  orientation: Quat;
  focalPx: number;
  cx: number;
  cy: number;
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [qx, qy, qz, qw] = q;
  const tx = 2 * (qy * v[2] - qz * v[1]);
  const ty = 2 * (qz * v[0] - qx * v[2]);
  const tz = 2 * (qx * v[1] - qy * v[0]);
  return [
    v[0] + qw * tx + (qy * tz - qz * ty),
    v[1] + qw * ty + (qz * tx - qx * tz),
    v[2] + qw * tz + (qx * ty - qy * tx),
  ];
}

export function quatConj(q: Quat): Quat {
  return [-q[0], -q[1], -q[2], q[3]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function norm(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function normalize(v: Vec3): Vec3 {
  const n = norm(v) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function makeCamera(
  eye: Vec3,
  orientation: Quat,
  width: number,
  height: number,
  focalPx = 900
): Camera {
  return { eye, orientation, focalPx, cx: width / 2, cy: height / 2 };
}

/** World point to canvas pixel; null when behind the camera. */
export function worldToScreen(cam: Camera, p: Vec3): [number, number] | null {
  const local = quatRotate(quatConj(cam.orientation), sub(p, cam.eye));
  const forward = local[1];
  if (forward <= 1e-6) return null;
  return [
    cam.cx + (cam.focalPx * local[0]) / forward,
    cam.cy - (cam.focalPx * local[2]) / forward,
  ];
}

/** Canvas pixel to a unit gaze direction through the viewpoint. */
export function screenToGaze(cam: Camera, px: number, py: number): Vec3 {
  const local: Vec3 = [(px - cam.cx) / cam.focalPx, 1, -(py - cam.cy) / cam.focalPx];
  return normalize(quatRotate(cam.orientation, local));
}

export function angleBetweenDeg(a: Vec3, b: Vec3): number {
  const an = normalize(a);
  const bn = normalize(b);
  const c = Math.min(1, Math.max(-1, an[0] * bn[0] + an[1] * bn[1] + an[2] * bn[2]));
  return (Math.acos(c) * 180) / Math.PI;
}
