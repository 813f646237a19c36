// WebSocket client: parses frames, tracks connection/staleness, reconnects
// with a small backoff. The render loop polls `staleSeconds()` to surface the
// stale indicator; the socket never drives rendering directly.

import { ServerFrame, parseServerFrame } from "./protocol.js";

export class SessionSocket {
  private ws: WebSocket | null = null;
  private lastFrameAt = 0;
  connected = false;

  constructor(
    private url: string,
    private onFrame: (frame: ServerFrame) => void,
    private reconnectMs = 1000,
  ) {}

  open(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.connected = true;
    };
    this.ws.onmessage = (ev: MessageEvent) => {
      const frame = parseServerFrame(String(ev.data));
      if (frame) {
        this.lastFrameAt = performance.now();
        this.onFrame(frame);
      }
    };
    this.ws.onclose = () => {
      this.connected = false;
      setTimeout(() => this.open(), this.reconnectMs);
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  send(text: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
    }
  }

  staleSeconds(): number {
    if (this.lastFrameAt === 0) return Infinity;
    return (performance.now() - this.lastFrameAt) / 1000;
  }
}
