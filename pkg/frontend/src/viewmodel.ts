/**
 * Client-side session state: the latest applied message, trial phase, the
 * trap-loss latch, and 30-second rolling series for the temporal plots.
 *
 * Messages are applied atomically — the renderer only ever sees the state
 * as it stood after some complete message, never mid-application.
 */
import {
  Device,
  Hello,
  Inbound,
  ResultMsg,
  StateMsg,
  parseInbound,
} from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "connected" | "disconnected";
export type TrialPhase = "pending" | "running" | "ended";

export interface SeriesPoint {
  t: number;
  value: number;
}

export const SERIES_WINDOW_S = 30;

export class RollingSeries {
  points: SeriesPoint[] = [];

  push(t: number, value: number): void {
    this.points.push({ t, value });
    // bounded by construction: drop everything older than the window
    const cutoff = t - SERIES_WINDOW_S;
    let firstKept = 0;
    while (
      firstKept < this.points.length &&
      this.points[firstKept].t < cutoff
    ) {
      firstKept += 1;
    }
    if (firstKept > 0) this.points.splice(0, firstKept);
  }
}

export class ViewModel {
  status: ConnectionStatus = "idle";
  phase: TrialPhase = "pending";
  hello: Hello | null = null;
  state: StateMsg | null = null;
  result: ResultMsg | null = null;
  selectedDevice: Device = "right";
  trapLostLatched = false;
  malformedCount = 0;
  lastError: string | null = null;
  forceSeries = new RollingSeries();
  distanceSeries = new RollingSeries();

  /** Feed one raw line from the socket. Malformed input is dropped and
   * counted; it must never throw. */
  applyRaw(line: string): void {
    const msg = parseInbound(line);
    if (msg === null) {
      this.malformedCount += 1;
      return;
    }
    this.apply(msg);
  }

  apply(msg: Inbound): void {
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        if (!msg.devices.includes(this.selectedDevice)) {
          this.selectedDevice = msg.devices[0];
        }
        break;
      case "state":
        this.state = msg;
        this.phase = "running";
        // latch only: the alert may never clear while the trial runs
        if (msg.trap_lost) this.trapLostLatched = true;
        // plots show exactly the received values, no client-side smoothing
        this.forceSeries.push(msg.t, msg.contact_force);
        this.distanceSeries.push(msg.t, msg.trap_distance);
        break;
      case "result":
        this.result = msg;
        this.phase = "ended";
        break;
      case "error":
        this.lastError = msg.reason;
        break;
    }
  }

  onSocketOpen(): void {
    this.status = "connected";
  }

  onSocketClosed(): void {
    this.status = "disconnected";
  }

  /** Input is live only while connected with a running trial. */
  get inputEnabled(): boolean {
    return this.status === "connected" && this.phase === "running";
  }

  get warning(): boolean {
    return this.state !== null && this.state.warning;
  }
}
