/**
 * Conformance of the console's outbound messages against the checked-in
 * schema goldens, plus defensive parsing of inbound lines. The goldens are
 * the wire contract: every line must validate, and the console's encoder
 * must reproduce each one byte-for-byte from its parsed form.
 */
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { z } from "zod";
import {
  checkOutbound,
  encodeLine,
  Outbound,
  parseInbound,
} from "../src/protocol.js";

const goldens = readFileSync(
  new URL("./fixtures/outbound-goldens.ndjson", import.meta.url),
  "utf8",
)
  .trim()
  .split("\n");

const stream = readFileSync(
  new URL("./fixtures/state-stream.ndjson", import.meta.url),
  "utf8",
)
  .trim()
  .split("\n");

// an independent statement of the outbound schema, so the hand-rolled
// validator and the goldens are checked against each other
const finite = z.number().finite();
const outboundMirror = z.discriminatedUnion("type", [
  z
    .object({
      type: z.literal("hand_input"),
      device: z.enum(["left", "right"]),
      vel: z.tuple([finite, finite, finite]),
      t: finite.nonnegative(),
    })
    .strict(),
  z
    .object({
      type: z.literal("control"),
      action: z.enum(["start", "abort"]),
    })
    .strict(),
]);

describe("outbound goldens", () => {
  it("every golden validates against the schema", () => {
    for (const line of goldens) {
      const msg = JSON.parse(line);
      expect(() => checkOutbound(msg)).not.toThrow();
      expect(outboundMirror.safeParse(msg).success).toBe(true);
    }
  });

  it("the encoder reproduces each golden byte-for-byte", () => {
    for (const line of goldens) {
      const msg = JSON.parse(line) as Outbound;
      expect(encodeLine(msg)).toBe(line);
    }
  });

  it("covers both message types and both devices", () => {
    const msgs = goldens.map((l) => JSON.parse(l));
    expect(msgs.some((m) => m.type === "control" && m.action === "start")).toBe(true);
    expect(msgs.some((m) => m.type === "control" && m.action === "abort")).toBe(true);
    expect(msgs.some((m) => m.device === "left")).toBe(true);
    expect(msgs.some((m) => m.device === "right")).toBe(true);
  });
});

describe("outbound rejection", () => {
  const good = { type: "hand_input", device: "right", vel: [0, 0, 0], t: 0 };

  it.each([
    ["extra field", { ...good, smuggled: 1 }],
    ["bad device", { ...good, device: "middle" }],
    ["negative t", { ...good, t: -0.1 }],
    ["NaN velocity", { ...good, vel: [NaN, 0, 0] }],
    ["short velocity", { ...good, vel: [1, 2] }],
    ["missing field", { type: "hand_input", device: "right", vel: [0, 0, 0] }],
    ["unknown type", { type: "telemetry" }],
    ["bad action", { type: "control", action: "pause" }],
  ])("rejects %s", (_label, msg) => {
    expect(() => checkOutbound(msg as never)).toThrow();
    expect(outboundMirror.safeParse(msg).success).toBe(false);
  });
});

describe("inbound parsing", () => {
  it("accepts every line of the recorded stream", () => {
    for (const line of stream) {
      expect(parseInbound(line)).not.toBeNull();
    }
  });

  it("drops garbage without throwing", () => {
    expect(parseInbound("not json at all")).toBeNull();
    expect(parseInbound("[1,2,3]")).toBeNull();
    expect(parseInbound('{"type":"mystery"}')).toBeNull();
    expect(parseInbound('{"type":"state","tick":-1}')).toBeNull();
    const state = JSON.parse(stream[1]);
    delete state.geometry;
    expect(parseInbound(JSON.stringify(state))).toBeNull();
  });
});
