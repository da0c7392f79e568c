/**
 * Pointer-drag → velocity commands, the pointer stand-in for a hand device.
 *
 * The top-view canvas doubles as the input surface: with two devices the
 * left half steers the left trap and the right half the right trap, so a
 * multi-touch screen can drive both at once; with one device the whole
 * surface maps to it. Drag displacement (pixels from the press point) maps
 * linearly to a commanded velocity, the wheel nudges depth, and every
 * emitted velocity is magnitude-capped. Release always zeroes the command.
 */
import { Device, Vec3 } from "./protocol.js";

export interface InputConfig {
  /** hand-units/s per pixel of drag displacement */
  sensitivity: number;
  /** cap on |vel| of any emitted command, hand-units/s */
  velocityCap: number;
  /** depth hand-units/s per wheel line */
  wheelGain: number;
  /** wheel-induced depth velocity decays by this factor each emission */
  wheelDecay: number;
}

export const DEFAULT_INPUT: InputConfig = {
  sensitivity: 0.02,
  velocityCap: 3.0,
  wheelGain: 0.25,
  wheelDecay: 0.85,
};

interface DragState {
  pointerId: number;
  originX: number;
  originY: number;
  dx: number;
  dy: number;
}

export interface PointerSample {
  pointerId: number;
  x: number;
  y: number;
}

export class InputBinding {
  private drags = new Map<Device, DragState>();
  private wheelVz = new Map<Device, number>();

  constructor(
    public devices: readonly Device[],
    public config: InputConfig = DEFAULT_INPUT,
  ) {}

  /** Which device a press at x owns, given the surface width. */
  deviceForX(x: number, width: number): Device {
    if (this.devices.length === 1) return this.devices[0];
    return x < width / 2 ? "left" : "right";
  }

  pointerDown(sample: PointerSample, width: number): Device {
    const device = this.deviceForX(sample.x, width);
    this.drags.set(device, {
      pointerId: sample.pointerId,
      originX: sample.x,
      originY: sample.y,
      dx: 0,
      dy: 0,
    });
    return device;
  }

  pointerMove(sample: PointerSample): void {
    for (const drag of this.drags.values()) {
      if (drag.pointerId === sample.pointerId) {
        drag.dx = sample.x - drag.originX;
        drag.dy = sample.y - drag.originY;
      }
    }
  }

  pointerUp(pointerId: number): void {
    for (const [device, drag] of this.drags) {
      if (drag.pointerId === pointerId) this.drags.delete(device);
    }
  }

  /** Wheel over the surface nudges the active device's depth axis. */
  wheel(deltaY: number, x: number, width: number): void {
    const device = this.deviceForX(x, width);
    const current = this.wheelVz.get(device) ?? 0;
    this.wheelVz.set(device, current - deltaY * this.config.wheelGain);
  }

  releaseAll(): void {
    this.drags.clear();
    this.wheelVz.clear();
  }

  /**
   * The velocity to emit for a device this tick. Screen-up drags command
   * +y (canvas y grows downward), wheel-up commands +z. Zero-on-release and
   * zero-while-idle come out of the same path: no drag, no wheel → (0,0,0).
   */
  currentVelocity(device: Device): Vec3 {
    const drag = this.drags.get(device);
    const s = this.config.sensitivity;
    let vx = 0;
    let vy = 0;
    if (drag !== undefined) {
      vx = drag.dx * s;
      vy = -drag.dy * s;
    }
    let vz = this.wheelVz.get(device) ?? 0;
    if (vz !== 0) {
      const decayed = vz * this.config.wheelDecay;
      this.wheelVz.set(device, Math.abs(decayed) < 1e-4 ? 0 : decayed);
    }
    // normalize -0 from the axis flips so commands serialize canonically
    const z = (x: number) => (x === 0 ? 0 : x);
    return capMagnitude([z(vx), z(vy), z(vz)], this.config.velocityCap);
  }
}

export function capMagnitude(vel: Vec3, cap: number): Vec3 {
  const mag = Math.hypot(vel[0], vel[1], vel[2]);
  if (mag <= cap || mag === 0) return vel;
  const k = cap / mag;
  return [vel[0] * k, vel[1] * k, vel[2] * k];
}
