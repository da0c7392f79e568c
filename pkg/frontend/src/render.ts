/**
 * Canvas drawing for the twin's two fixed projections plus the rolling
 * charts and the force gauge. Everything here is a pure function of the
 * applied state against a structural 2D-context interface, so tests can
 * record draw calls without a browser.
 */
import { Device, Hello, StateMsg, Vec3 } from "./protocol.js";
import { RollingSeries } from "./viewmodel.js";

/** The subset of CanvasRenderingContext2D the console draws with. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export type Projection = "top" | "side";

export const DEVICE_COLORS: Record<Device, string> = {
  left: "#3da5ff",
  right: "#ff9f40",
};
export const WARNING_COLOR = "#e5484d";
export const OK_COLOR = "#46a758";
/** declared gauge scale: px of force-vector length per unit |f_hand| */
export const FORCE_SCALE_PX = 40;
/** gauge saturates at this |f_hand|, in hand-force units */
export const GAUGE_FULL_SCALE = 1.0;

interface Frame {
  scale: number;
  cx: number;
  cy: number;
  ax: number; // world axis drawn along canvas x
  ay: number; // world axis drawn along canvas y (flipped: up is positive)
}

interface WorkspaceDoc {
  min: number[];
  max: number[];
}

function frameFor(
  hello: Hello,
  view: Projection,
  w: number,
  h: number,
): Frame {
  const ws = (hello.document.workspace ?? {
    min: [-20, -20, -20],
    max: [20, 20, 20],
  }) as WorkspaceDoc;
  const ax = 0;
  const ay = view === "top" ? 1 : 2;
  const spanX = ws.max[ax] - ws.min[ax];
  const spanY = ws.max[ay] - ws.min[ay];
  const scale = 0.92 * Math.min(w / spanX, h / spanY);
  return { scale, cx: w / 2, cy: h / 2, ax, ay };
}

function toCanvas(f: Frame, p: readonly number[]): [number, number] {
  return [f.cx + p[f.ax] * f.scale, f.cy - p[f.ay] * f.scale];
}

function circle(ctx: Ctx2D, x: number, y: number, r: number): void {
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
}

interface ObstacleDoc {
  type: string;
  normal?: number[];
  offset?: number;
  min?: number[];
  max?: number[];
}

interface CellDoc {
  radius: number;
}

interface RobotElementDoc {
  radius: number;
  trap: number | null;
}

interface TrapDoc {
  device: Device;
}

export function renderScene(
  ctx: Ctx2D,
  w: number,
  h: number,
  hello: Hello,
  state: StateMsg,
  view: Projection,
): void {
  const f = frameFor(hello, view, w, h);
  const doc = hello.document;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, w, h);

  // workspace frame
  const ws = (doc.workspace ?? { min: [-20, -20, -20], max: [20, 20, 20] }) as WorkspaceDoc;
  const [wx0, wy0] = toCanvas(f, [
    ws.min[0],
    view === "top" ? ws.max[1] : 0,
    ws.max[2],
  ]);
  const [wx1, wy1] = toCanvas(f, [
    ws.max[0],
    view === "top" ? ws.min[1] : 0,
    ws.min[2],
  ]);
  ctx.strokeStyle = "#2c3440";
  ctx.lineWidth = 1;
  ctx.strokeRect(wx0, wy0, wx1 - wx0, wy1 - wy0);

  // obstacles: boxes as filled rects, planes as their boundary line in
  // this projection (skipped when the normal is perpendicular to it)
  const obstacles = (doc.obstacles ?? []) as ObstacleDoc[];
  for (const ob of obstacles) {
    if (ob.type === "box" && ob.min && ob.max) {
      const [bx0, by0] = toCanvas(f, [
        ob.min[0],
        view === "top" ? ob.max[1] : 0,
        ob.max[2],
      ]);
      const [bx1, by1] = toCanvas(f, [
        ob.max[0],
        view === "top" ? ob.min[1] : 0,
        ob.min[2],
      ]);
      ctx.fillStyle = "#37404d";
      ctx.fillRect(bx0, by0, bx1 - bx0, by1 - by0);
    } else if (ob.type === "plane" && ob.normal && ob.offset !== undefined) {
      const na = ob.normal[f.ax];
      const nb = ob.normal[f.ay];
      const mag = Math.hypot(na, nb);
      if (mag < 1e-9) continue; // face-on to this projection
      // boundary of the free half-space, sliced at the third axis = 0
      const px = (na / (mag * mag)) * ob.offset;
      const py = (nb / (mag * mag)) * ob.offset;
      const [lx, ly] = toCanvas(f, axisVec(f, px, py));
      const tx = -nb / mag;
      const ty = na / mag;
      const L = Math.max(w, h);
      ctx.strokeStyle = "#4b5668";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(lx - tx * L * f.scale, ly + ty * L * f.scale);
      ctx.lineTo(lx + tx * L * f.scale, ly - ty * L * f.scale);
      ctx.stroke();
    }
  }

  // goal region
  const goal = doc.goal as { center: number[]; radius: number } | null;
  if (goal) {
    const [gx, gy] = toCanvas(f, goal.center);
    circle(ctx, gx, gy, goal.radius * f.scale);
    ctx.strokeStyle = OK_COLOR;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  // cells at their live positions, radii from the document
  const cellDocs = (doc.cells ?? []) as CellDoc[];
  state.geometry.cells.forEach((pos, i) => {
    const [x, y] = toCanvas(f, pos);
    circle(ctx, x, y, (cellDocs[i]?.radius ?? 1.5) * f.scale);
    ctx.fillStyle = "#7a5ea8";
    ctx.fill();
  });

  // robot elements
  const robot = doc.robot as { elements: RobotElementDoc[] } | undefined;
  const elementDocs = robot?.elements ?? [];
  state.geometry.elements.forEach((pos, i) => {
    const [x, y] = toCanvas(f, pos);
    circle(ctx, x, y, (elementDocs[i]?.radius ?? 1.0) * f.scale);
    ctx.fillStyle = "#d8dee9";
    ctx.fill();
  });

  // traps, colored by device
  const trapDocs = (doc.traps ?? []) as TrapDoc[];
  state.traps.forEach((pos, i) => {
    const [x, y] = toCanvas(f, pos);
    const color = DEVICE_COLORS[trapDocs[i]?.device ?? "right"];
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    const s = 6;
    ctx.beginPath();
    ctx.moveTo(x - s, y);
    ctx.lineTo(x + s, y);
    ctx.moveTo(x, y - s);
    ctx.lineTo(x, y + s);
    ctx.stroke();
  });

  // per-device force vector, anchored at that device's first trap,
  // length = |f_hand| * FORCE_SCALE_PX in canvas pixels
  for (const device of hello.devices) {
    const fh = state.f_hand[device];
    if (!fh) continue;
    const idx = trapDocs.findIndex((t) => t.device === device);
    if (idx < 0 || idx >= state.traps.length) continue;
    const [x, y] = toCanvas(f, state.traps[idx]);
    const va = fh[f.ax];
    const vb = fh[f.ay];
    ctx.strokeStyle = state.warning ? WARNING_COLOR : DEVICE_COLORS[device];
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(x, y);
    ctx.lineTo(x + va * FORCE_SCALE_PX, y - vb * FORCE_SCALE_PX);
    ctx.stroke();
  }
}

function axisVec(f: Frame, a: number, b: number): number[] {
  const v = [0, 0, 0];
  v[f.ax] = a;
  v[f.ay] = b;
  return v;
}

export interface GaugeView {
  /** 0..1 fill fraction of the bar */
  fraction: number;
  color: string;
  label: string;
}

/** The force gauge the operator modulates speed from: |f_hand| of the
 * selected device against the declared full scale, tinted on warning. */
export function gaugeView(state: StateMsg | null, device: Device): GaugeView {
  if (state === null) return { fraction: 0, color: OK_COLOR, label: "0.000" };
  const fh = state.f_hand[device] ?? [0, 0, 0];
  const mag = Math.hypot(fh[0], fh[1], fh[2]);
  return {
    fraction: Math.min(1, mag / GAUGE_FULL_SCALE),
    color: state.warning ? WARNING_COLOR : OK_COLOR,
    label: mag.toFixed(3),
  };
}

/** Polyline of exactly the received samples — no smoothing, no resampling. */
export function renderSeries(
  ctx: Ctx2D,
  w: number,
  h: number,
  series: RollingSeries,
  color: string,
): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, w, h);
  const pts = series.points;
  if (pts.length < 2) return;
  const t1 = pts[pts.length - 1].t;
  const t0 = Math.max(pts[0].t, t1 - 30);
  let vMax = 0;
  for (const p of pts) vMax = Math.max(vMax, p.value);
  const span = Math.max(t1 - t0, 1e-9);
  const yScale = vMax > 0 ? (h - 8) / vMax : 0;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pts.forEach((p, i) => {
    const x = ((p.t - t0) / span) * w;
    const y = h - 4 - p.value * yScale;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export function forceVectorLength(fh: Vec3): number {
  return Math.hypot(fh[0], fh[1], fh[2]) * FORCE_SCALE_PX;
}
