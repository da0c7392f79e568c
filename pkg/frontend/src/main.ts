/**
 * Console wiring: URL query → WebSocket address, pointer events → the
 * input binding, a 60 Hz send loop while the trial runs, and a rAF render
 * loop that drains the network queue and redraws both projections.
 *
 * Query parameters: ?server=host:port&scenario=name&device=left|right
 */
import { InputBinding } from "./input.js";
import { Net } from "./net.js";
import { Device } from "./protocol.js";
import { gaugeView, renderScene, renderSeries, Ctx2D } from "./render.js";
import { ViewModel } from "./viewmodel.js";

const SEND_HZ = 60;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function wsUrl(): string {
  const q = new URLSearchParams(location.search);
  const server = q.get("server") ?? location.host;
  const scenario = q.get("scenario") ?? "single-bead";
  return `ws://${server}/ws/operator?scenario=${encodeURIComponent(scenario)}`;
}

function main(): void {
  const view = new ViewModel();
  const net = new Net();
  const q = new URLSearchParams(location.search);
  const preferred = q.get("device");
  if (preferred === "left" || preferred === "right") {
    view.selectedDevice = preferred;
  }

  const topCanvas = el<HTMLCanvasElement>("top-view");
  const sideCanvas = el<HTMLCanvasElement>("side-view");
  const forceChart = el<HTMLCanvasElement>("force-chart");
  const distChart = el<HTMLCanvasElement>("distance-chart");
  const statusEl = el<HTMLSpanElement>("status");
  const bannerEl = el<HTMLDivElement>("banner");
  const lossEl = el<HTMLDivElement>("trap-loss");
  const gaugeFill = el<HTMLDivElement>("gauge-fill");
  const gaugeLabel = el<HTMLSpanElement>("gauge-label");
  const dropsEl = el<HTMLSpanElement>("drops");
  const startBtn = el<HTMLButtonElement>("start");
  const abortBtn = el<HTMLButtonElement>("abort");
  const retryBtn = el<HTMLButtonElement>("retry");

  let binding = new InputBinding(["right"]);
  let sessionEpoch: number | null = null;

  net.onStatus = (status) => {
    if (status === "connected") view.onSocketOpen();
    if (status === "disconnected") view.onSocketClosed();
    statusEl.textContent = status;
    statusEl.className = status;
    bannerEl.hidden = status !== "disconnected";
  };

  retryBtn.onclick = () => net.connect(wsUrl());
  startBtn.onclick = () => {
    sessionEpoch = performance.now();
    net.send({ type: "control", action: "start" });
  };
  abortBtn.onclick = () => net.send({ type: "control", action: "abort" });

  // pointer input on the top view; releases always zero the command
  topCanvas.addEventListener("pointerdown", (ev) => {
    if (!view.inputEnabled) return;
    topCanvas.setPointerCapture(ev.pointerId);
    binding.pointerDown(
      { pointerId: ev.pointerId, x: ev.offsetX, y: ev.offsetY },
      topCanvas.clientWidth,
    );
  });
  topCanvas.addEventListener("pointermove", (ev) => {
    binding.pointerMove({ pointerId: ev.pointerId, x: ev.offsetX, y: ev.offsetY });
  });
  const release = (ev: PointerEvent) => binding.pointerUp(ev.pointerId);
  topCanvas.addEventListener("pointerup", release);
  topCanvas.addEventListener("pointercancel", release);
  topCanvas.addEventListener(
    "wheel",
    (ev) => {
      if (!view.inputEnabled) return;
      ev.preventDefault();
      binding.wheel(Math.sign(ev.deltaY), ev.offsetX, topCanvas.clientWidth);
    },
    { passive: false },
  );

  // 60 Hz command loop: while running, every tick emits the current
  // velocity for every device — an idle tick emits an explicit zero, so
  // the server's zero-order hold can never run away on a stale command
  setInterval(() => {
    if (!view.inputEnabled || sessionEpoch === null) return;
    const t = Math.max(0, (performance.now() - sessionEpoch) / 1000);
    for (const device of binding.devices) {
      net.send({
        type: "hand_input",
        device,
        vel: binding.currentVelocity(device),
        t,
      });
    }
  }, 1000 / SEND_HZ);

  function applyInbound(): void {
    for (const line of net.drain()) view.applyRaw(line);
    if (view.hello !== null && binding.devices.join() !== view.hello.devices.join()) {
      binding = new InputBinding(view.hello.devices as Device[]);
    }
  }

  function draw(): void {
    const ctxOf = (c: HTMLCanvasElement) =>
      c.getContext("2d") as unknown as Ctx2D;
    if (view.hello !== null && view.state !== null) {
      renderScene(ctxOf(topCanvas), topCanvas.width, topCanvas.height, view.hello, view.state, "top");
      renderScene(ctxOf(sideCanvas), sideCanvas.width, sideCanvas.height, view.hello, view.state, "side");
    }
    renderSeries(ctxOf(forceChart), forceChart.width, forceChart.height, view.forceSeries, "#e5484d");
    renderSeries(ctxOf(distChart), distChart.width, distChart.height, view.distanceSeries, "#3da5ff");

    const gauge = gaugeView(view.state, view.selectedDevice);
    gaugeFill.style.width = `${(100 * gauge.fraction).toFixed(1)}%`;
    gaugeFill.style.background = gauge.color;
    gaugeLabel.textContent = gauge.label;
    // the trap-loss alert latches for the rest of the trial
    lossEl.hidden = !view.trapLostLatched;
    dropsEl.textContent = String(view.malformedCount);
    startBtn.disabled = view.phase !== "pending" || !net.connected;
    abortBtn.disabled = !view.inputEnabled;
    if (view.phase === "ended" && view.result !== null) {
      statusEl.textContent = `ended: ${view.result.reason}`;
    }
  }

  function frame(): void {
    applyInbound();
    draw();
    requestAnimationFrame(frame);
  }

  net.connect(wsUrl());
  requestAnimationFrame(frame);
}

main();
