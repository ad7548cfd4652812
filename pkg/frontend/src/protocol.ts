// Message types for the streaming protocol (docs/protocol.md).

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface HandPayload {
  position: Vec3;
  velocity: Vec3;
  orientation: Quat;
  trigger: boolean;
  held_object: string | null;
}

export interface FrameMessage {
  type: "frame";
  t: number;
  gaze_dir: Vec3;
  left: HandPayload;
  right: HandPayload;
}

export interface SceneObjectJson {
  id: string;
  kind: "cylinder" | "coaster" | "gripper";
  position: Vec3;
  orientation: Quat;
  geometry:
    | { type: "cylinder"; radius: number; height: number }
    | { type: "disc"; radius: number }
    | { type: "box"; extents: Vec3 };
}

export interface SceneJson {
  objects: SceneObjectJson[];
  viewpoint: { position: Vec3; orientation: Quat };
  table_height: number;
}

export interface WelcomeMessage {
  type: "welcome";
  protocol_version: number;
  scene: SceneJson;
  dt: number;
  rate_hz: number;
  threshold: number;
}

export interface HandEstimate {
  hand: "left" | "right";
  t: number;
  window_status: "ok" | "warming_up";
  prediction: { action: "pick" | "place"; target: string } | null;
  scores: Record<string, number>;
}

export interface BimanualPayload {
  kind: "independent" | "multihand_pick" | "multihand_place" | "hand_over";
  target: string | null;
  from_hand: "left" | "right" | null;
  to_hand: "left" | "right" | null;
  object_id: string | null;
}

export interface DebugCandidate {
  id: string;
  z: number;
  likelihood: number;
  approach: string;
  polyline: Vec3[];
}

export interface DebugPayload {
  aoi: Record<string, number>;
  tpa: Record<string, Record<string, number>>;
  paths: Record<string, { predicted: Vec3[]; candidates: DebugCandidate[] }>;
}

export interface EstimateMessage {
  type: "estimate";
  t: number;
  left: HandEstimate;
  right: HandEstimate;
  bimanual: BimanualPayload;
  debug?: DebugPayload;
}

export type ServerMessage =
  | WelcomeMessage
  | EstimateMessage
  | { type: "error"; message: string }
  | { type: "notice"; reason: string; dropped_t?: number }
  | { type: "ack"; [key: string]: unknown };

export function parseServerMessage(raw: string): ServerMessage {
  const msg = JSON.parse(raw);
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error("malformed server message");
  }
  return msg as ServerMessage;
}

export function frameMessage(
  t: number,
  gaze: Vec3,
  left: HandPayload,
  right: HandPayload
): FrameMessage {
  return { type: "frame", t, gaze_dir: gaze, left, right };
}
