// WebSocket session: typed send/receive with ordered frame sequencing.
// The socket is injected so the scripted tests can run under node (ws).

import {
  EstimateMessage,
  FrameMessage,
  ServerMessage,
  WelcomeMessage,
  parseServerMessage,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "message", cb: (ev: { data: unknown }) => void): void;
  addEventListener(type: "open" | "close" | "error", cb: () => void): void;
}

export interface SessionHandlers {
  onWelcome?: (msg: WelcomeMessage) => void;
  onEstimate?: (msg: EstimateMessage) => void;
  onError?: (message: string) => void;
  onClose?: () => void;
}

export class Session {
  welcome: WelcomeMessage | null = null;
  lastEstimate: EstimateMessage | null = null;
  sent = 0;
  received = 0;

  constructor(private socket: SocketLike, private handlers: SessionHandlers = {}) {
    socket.addEventListener("message", (ev) => this.onMessage(String(ev.data)));
    socket.addEventListener("close", () => this.handlers.onClose?.());
  }

  private onMessage(raw: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(raw);
    } catch {
      this.handlers.onError?.("unparseable server message");
      return;
    }
    if (msg.type === "welcome") {
      this.welcome = msg;
      this.handlers.onWelcome?.(msg);
    } else if (msg.type === "estimate") {
      this.received += 1;
      this.lastEstimate = msg;
      this.handlers.onEstimate?.(msg);
    } else if (msg.type === "error") {
      this.handlers.onError?.(msg.message);
    }
  }

  sendFrame(frame: FrameMessage): void {
    this.sent += 1;
    this.socket.send(JSON.stringify(frame));
  }

  setDebug(enabled: boolean): void {
    this.socket.send(JSON.stringify({ type: "set_debug", enabled }));
  }

  reset(): void {
    this.socket.send(JSON.stringify({ type: "reset" }));
  }

  close(): void {
    this.socket.close();
  }
}
