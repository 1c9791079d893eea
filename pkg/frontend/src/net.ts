/**
 * WebSocket connection with reconnect backoff. The socket factory is
 * injectable so the logic is testable without a network stack.
 */

export interface SocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  send(data: string): void;
  close(): void;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionHooks {
  onStatus(status: "connecting" | "connected" | "disconnected"): void;
  onMessage(raw: string): void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class Connection {
  private socket: SocketLike | null = null;
  private backoff = BACKOFF_START_MS;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly url: string,
              private readonly hooks: ConnectionHooks,
              private readonly factory: SocketFactory =
                  (u) => new WebSocket(u) as unknown as SocketLike) {}

  open(): void {
    if (this.closed) return;
    this.hooks.onStatus("connecting");
    const ws = this.factory(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.backoff = BACKOFF_START_MS;
      this.hooks.onStatus("connected");
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.hooks.onMessage(ev.data);
    };
    ws.onerror = () => undefined; // close handler drives the retry
    ws.onclose = () => {
      this.hooks.onStatus("disconnected");
      if (!this.closed) {
        this.timer = setTimeout(() => this.open(), this.backoff);
        this.backoff = Math.min(this.backoff * 2, BACKOFF_MAX_MS);
      }
    };
  }

  send(data: string): boolean {
    if (this.socket && this.socket.readyState === 1) {
      this.socket.send(data);
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
  }
}
