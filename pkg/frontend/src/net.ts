/**
 * WebSocket client with a message queue between the network and the
 * renderer: the socket callback only enqueues raw lines; the UI thread
 * drains the queue once per animation frame and applies messages whole.
 */
import { Outbound, encodeLine } from "./protocol.js";

export class Net {
  private ws: WebSocket | null = null;
  readonly queue: string[] = [];
  onStatus: (status: "connecting" | "connected" | "disconnected") => void =
    () => {};

  connect(url: string): void {
    this.close();
    this.onStatus("connecting");
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.onopen = () => this.onStatus("connected");
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.queue.push(ev.data);
    };
    ws.onclose = () => {
      if (this.ws === ws) {
        this.ws = null;
        this.onStatus("disconnected");
      }
    };
    ws.onerror = () => {
      // onclose follows; the banner comes from the status callback
    };
  }

  close(): void {
    if (this.ws !== null) {
      const ws = this.ws;
      this.ws = null;
      ws.close();
      this.onStatus("disconnected");
    }
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(msg: Outbound): void {
    if (this.connected) this.ws!.send(encodeLine(msg));
  }

  /** Drain every queued line; the caller applies them back-to-back so a
   * frame never renders between two halves of a burst. */
  drain(): string[] {
    return this.queue.splice(0, this.queue.length);
  }
}
