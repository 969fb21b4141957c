import type { StreamMessage } from "./types.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

/** Minimal WebSocket surface so tests can inject the `ws` package. */
export interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export interface StreamHandlers {
  onMessage: (msg: StreamMessage) => void;
  onStatus?: (status: ConnectionStatus) => void;
}

/** Live session stream with exponential-backoff reconnect. */
export class StreamClient {
  private ws: WsLike | null = null;
  private attempts = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private wsFactory: WsFactory,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    this.handlers.onStatus?.("connecting");
    const ws = this.wsFactory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.handlers.onStatus?.("open");
    };
    ws.onmessage = (ev) => {
      this.handlers.onMessage(JSON.parse(String(ev.data)) as StreamMessage);
    };
    ws.onerror = () => {};
    ws.onclose = () => {
      this.handlers.onStatus?.("closed");
      if (!this.stopped) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    const delay = Math.min(500 * 2 ** this.attempts, 10000);
    this.attempts += 1;
    this.timer = setTimeout(() => this.open(), delay);
  }

  close(): void {
    this.stopped = true;
    if (this.timer) clearTimeout(this.timer);
    this.ws?.close();
  }
}
