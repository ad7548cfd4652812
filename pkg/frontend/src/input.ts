// Input mapping: pointer drives the gaze, keys drive the selected hand.
// Kept free of DOM types so the scripted session test can drive it.

import { HandPayload, Quat, Vec3 } from "./protocol.js";

export const HAND_SPEED = 0.55; // m/s commanded by the keys
export const DECAY_TAU = 0.06; // s; velocity decays to ~1% within 0.3 s
const IDENTITY: Quat = [0, 0, 0, 1];

export interface Bounds {
  min: Vec3;
  max: Vec3;
}

export const SCENE_BOUNDS: Bounds = { min: [-0.45, -0.05, 0.0], max: [0.45, 0.6, 0.5] };

export interface HandControl {
  position: Vec3;
  velocity: Vec3;
  trigger: boolean;
}

export interface InputState {
  gaze: Vec3; // unit direction, set from the pointer
  controlled: "left" | "right";
  hands: { left: HandControl; right: HandControl };
  keys: Set<string>;
}

export function initialInput(gaze: Vec3, leftRest: Vec3, rightRest: Vec3): InputState {
  return {
    gaze,
    controlled: "right",
    hands: {
      left: { position: [...leftRest] as Vec3, velocity: [0, 0, 0], trigger: false },
      right: { position: [...rightRest] as Vec3, velocity: [0, 0, 0], trigger: false },
    },
    keys: new Set(),
  };
}

export function toggleHand(state: InputState): void {
  state.controlled = state.controlled === "right" ? "left" : "right";
}

export function setGrasp(state: InputState, hand: "left" | "right", down: boolean): void {
  state.hands[hand].trigger = down;
}

/** Commanded velocity from the held keys (world frame). */
export function commandedVelocity(keys: Set<string>): Vec3 {
  let vx = 0;
  let vy = 0;
  let vz = 0;
  if (keys.has("a") || keys.has("ArrowLeft")) vx -= 1;
  if (keys.has("d") || keys.has("ArrowRight")) vx += 1;
  if (keys.has("w") || keys.has("ArrowUp")) vy += 1;
  if (keys.has("s") || keys.has("ArrowDown")) vy -= 1;
  if (keys.has("q")) vz += 1;
  if (keys.has("e")) vz -= 1;
  const n = Math.hypot(vx, vy, vz);
  if (n === 0) return [0, 0, 0];
  return [(vx / n) * HAND_SPEED, (vy / n) * HAND_SPEED, (vz / n) * HAND_SPEED];
}

/** Advance the hand kinematics by dt seconds. */
export function stepInput(state: InputState, dt: number): void {
  const commanded = commandedVelocity(state.keys);
  for (const name of ["left", "right"] as const) {
    const hand = state.hands[name];
    const active = name === state.controlled;
    const decay = Math.exp(-dt / DECAY_TAU);
    for (let i = 0; i < 3; i++) {
      const target = active ? commanded[i] : 0;
      hand.velocity[i] = target + (hand.velocity[i] - target) * decay;
      hand.position[i] += hand.velocity[i] * dt;
      hand.position[i] = Math.min(
        SCENE_BOUNDS.max[i],
        Math.max(SCENE_BOUNDS.min[i], hand.position[i])
      );
    }
  }
}

export function handPayload(hand: HandControl, held: string | null = null): HandPayload {
  return {
    position: [...hand.position] as Vec3,
    velocity: [...hand.velocity] as Vec3,
    orientation: IDENTITY,
    trigger: hand.trigger,
    held_object: held,
  };
}
