/**
 * Wire types for the operator console, mirroring the NDJSON protocol the
 * session server speaks. Outbound messages are checked before send and
 * inbound ones narrowed defensively, so a malformed line can never take
 * the UI down. Validation is hand-rolled: the rendered page is plain ESM
 * with no bundler, so the runtime path stays dependency-free.
 */

export type Vec3 = [number, number, number];
export type Device = "left" | "right";

export interface HandInput {
  type: "hand_input";
  device: Device;
  vel: Vec3;
  t: number;
}

export interface Control {
  type: "control";
  action: "start" | "abort";
}

export type Outbound = HandInput | Control;

export interface Hello {
  type: "hello";
  session: string;
  scenario: string;
  dt: number;
  record_hz: number;
  devices: Device[];
  document: Record<string, unknown>;
  [extra: string]: unknown;
}

export interface StateMsg {
  type: "state";
  tick: number;
  t: number;
  robot: { position: Vec3; orientation: number[] };
  traps: Vec3[];
  contact_force: number;
  trap_distance: number;
  f_hand: Record<string, Vec3>;
  f_raw: Record<string, Vec3>;
  warning: boolean;
  trap_lost: boolean;
  geometry: { elements: Vec3[]; cells: Vec3[]; element_forces: Vec3[] };
  [extra: string]: unknown;
}

export interface ResultMsg {
  type: "result";
  success: boolean;
  reason: string;
  ticks: number;
  duration_s: number;
  [extra: string]: unknown;
}

export interface ErrorMsg {
  type: "error";
  reason: string;
}

export type Inbound = Hello | StateMsg | ResultMsg | ErrorMsg;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isVec3(v: unknown): v is Vec3 {
  return Array.isArray(v) && v.length === 3 && v.every(isFiniteNumber);
}

function isVec3Array(v: unknown): v is Vec3[] {
  return Array.isArray(v) && v.every(isVec3);
}

function isDevice(v: unknown): v is Device {
  return v === "left" || v === "right";
}

function isVec3Record(v: unknown): v is Record<string, Vec3> {
  return (
    typeof v === "object" &&
    v !== null &&
    Object.values(v).every(isVec3)
  );
}

const OUTBOUND_KEYS: Record<string, readonly string[]> = {
  hand_input: ["type", "device", "vel", "t"],
  control: ["type", "action"],
};

/** Validate an outbound message; throws with a readable reason. The same
 * checks gate the schema goldens in the test suite. */
export function checkOutbound(msg: unknown): Outbound {
  if (typeof msg !== "object" || msg === null) {
    throw new Error("outbound message must be an object");
  }
  const m = msg as Record<string, unknown>;
  const allowed = OUTBOUND_KEYS[m.type as string];
  if (allowed === undefined) {
    throw new Error(`unknown outbound type: ${String(m.type)}`);
  }
  for (const k of Object.keys(m)) {
    if (!allowed.includes(k)) throw new Error(`unexpected field: ${k}`);
  }
  for (const k of allowed) {
    if (!(k in m)) throw new Error(`missing field: ${k}`);
  }
  if (m.type === "hand_input") {
    if (!isDevice(m.device)) throw new Error(`bad device: ${String(m.device)}`);
    if (!isVec3(m.vel)) throw new Error("vel must be three finite numbers");
    if (!isFiniteNumber(m.t) || m.t < 0) {
      throw new Error("t must be a finite number >= 0");
    }
    return m as unknown as HandInput;
  }
  if (m.action !== "start" && m.action !== "abort") {
    throw new Error(`bad action: ${String(m.action)}`);
  }
  return m as unknown as Control;
}

/** Parse one inbound line; null means "drop it and count it, don't crash". */
export function parseInbound(line: string): Inbound | null {
  let payload: unknown;
  try {
    payload = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof payload !== "object" || payload === null) return null;
  const m = payload as Record<string, unknown>;
  switch (m.type) {
    case "hello": {
      const ok =
        typeof m.session === "string" &&
        typeof m.scenario === "string" &&
        isFiniteNumber(m.dt) &&
        m.dt > 0 &&
        isFiniteNumber(m.record_hz) &&
        Array.isArray(m.devices) &&
        m.devices.length > 0 &&
        m.devices.every(isDevice) &&
        typeof m.document === "object" &&
        m.document !== null;
      return ok ? (m as unknown as Hello) : null;
    }
    case "state": {
      const robot = m.robot as Record<string, unknown> | undefined;
      const geometry = m.geometry as Record<string, unknown> | undefined;
      const ok =
        isFiniteNumber(m.tick) &&
        Number.isInteger(m.tick) &&
        m.tick >= 0 &&
        isFiniteNumber(m.t) &&
        m.t >= 0 &&
        robot !== undefined &&
        isVec3(robot.position) &&
        Array.isArray(robot.orientation) &&
        robot.orientation.length === 4 &&
        robot.orientation.every(isFiniteNumber) &&
        isVec3Array(m.traps) &&
        isFiniteNumber(m.contact_force) &&
        m.contact_force >= 0 &&
        isFiniteNumber(m.trap_distance) &&
        m.trap_distance >= 0 &&
        isVec3Record(m.f_hand) &&
        isVec3Record(m.f_raw) &&
        typeof m.warning === "boolean" &&
        typeof m.trap_lost === "boolean" &&
        geometry !== undefined &&
        isVec3Array(geometry.elements) &&
        isVec3Array(geometry.cells) &&
        isVec3Array(geometry.element_forces);
      return ok ? (m as unknown as StateMsg) : null;
    }
    case "result": {
      const ok =
        typeof m.success === "boolean" &&
        typeof m.reason === "string" &&
        isFiniteNumber(m.ticks) &&
        isFiniteNumber(m.duration_s);
      return ok ? (m as unknown as ResultMsg) : null;
    }
    case "error":
      return typeof m.reason === "string" ? (m as unknown as ErrorMsg) : null;
    default:
      return null;
  }
}

/** Single-line JSON with recursively sorted keys — one message per line,
 * matching the server's canonical framing. */
export function encodeLine(msg: Outbound): string {
  checkOutbound(msg);
  return JSON.stringify(sortKeys(msg));
}

export function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeys);
  if (typeof value === "object" && value !== null) {
    const out: Record<string, unknown> = {};
    for (const k of Object.keys(value).sort()) {
      out[k] = sortKeys((value as Record<string, unknown>)[k]);
    }
    return out;
  }
  return value;
}
