#!/usr/bin/env python3
"""Record the console's test fixture: one headless session, 60 Hz.

The script drives a single-bead scenario through four phases — calm drag,
a fast drag that trips the force warning while shoving a cell, a quiet
stretch, then a runaway drag that loses the trap and ends the trial — so
the fixture exercises every flag the console must mirror. Output is the
exact NDJSON byte stream an operator connection would receive.

Run from the repository root:

    python3 frontend/scripts/record-fixture.py
"""

import asyncio
import json
from pathlib import Path

from ottwin.scenario import load_scenario
from ottwin.service.live import SessionRegistry
from ottwin.service.tcp import serve_tcp

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SCENARIO = {
    "schema_version": 1,
    "name": "console-fixture",
    "seed": 20240817,
    "dt": 0.001,
    "timeout_s": 30.0,
    "start": [0.0, 0.0, 0.0],
    "robot": {"elements": [{"offset": [0.0, 0.0, 0.0], "radius": 1.5, "trap": 0}]},
    "traps": [{"device": "right", "position": [0.0, 0.0, 0.0], "power_weight": 1.0}],
    "force": {"params": {"K": 5.0, "delta": 1.0, "A": 2.0, "C": 3.0, "r_max": 8.0}},
    "cells": [{"position": [15.0, 0.3, 0.0], "radius": 1.5, "stiffness": 10.0}],
    "obstacles": [
        {"type": "plane", "normal": [0.0, 0.0, 1.0], "offset": -10.0, "stiffness": 100.0},
        {"type": "box", "min": [30.0, -3.0, -3.0], "max": [35.0, 3.0, 3.0], "stiffness": 100.0},
    ],
    "goal": {"center": [40.0, 0.0, 0.0], "radius": 2.0},
    "teleop": {"f_warn": 2.5},
}

SCRIPT = [
    {"type": "control", "action": "start"},
    {"type": "hand_input", "device": "right", "vel": [0.1, 0, 0], "t": 0.10},
    {"type": "hand_input", "device": "right", "vel": [2, 0, 0], "t": 1.00},
    {"type": "hand_input", "device": "right", "vel": [-2, 0, 0], "t": 1.25},
    {"type": "hand_input", "device": "right", "vel": [0.1, 0, 0], "t": 1.50},
    {"type": "hand_input", "device": "right", "vel": [0, 0, 0], "t": 3.00},
    {"type": "hand_input", "device": "right", "vel": [6, 0, 0], "t": 6.00},
    # never consumed: advances the lockstep clock so the runaway above can
    # actually lose the trap before the disconnect lands
    {"type": "hand_input", "device": "right", "vel": [0, 0, 0], "t": 7.00},
]


def record() -> list[str]:
    scenario_path = FIXTURES / "fixture-scenario.json"
    scenario_path.write_text(json.dumps(SCENARIO, indent=2) + "\n")
    scenario = load_scenario(scenario_path)

    async def go():
        server = await serve_tcp(
            "127.0.0.1", 0, scenario, registry=SessionRegistry(), headless=True
        )
        port = server.sockets[0].getsockname()[1]
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        received = []
        try:
            for msg in SCRIPT:
                writer.write((json.dumps(msg) + "\n").encode())
            await writer.drain()
            writer.write_eof()
            while True:
                raw = await asyncio.wait_for(reader.readline(), timeout=30.0)
                if not raw:
                    break
                received.append(raw.decode().rstrip("\n"))
        finally:
            writer.close()
            server.close()
            await server.wait_closed()
        return received

    return asyncio.run(go())


def main() -> None:
    lines = record()
    out = FIXTURES / "state-stream.ndjson"
    out.write_text("\n".join(lines) + "\n")

    msgs = [json.loads(l) for l in lines]
    states = [m for m in msgs if m["type"] == "state"]
    summary = {
        "messages": len(msgs),
        "states": len(states),
        "first": msgs[0]["type"],
        "last": msgs[-1]["type"],
        "result_reason": msgs[-1].get("reason"),
        "warning_frames": sum(1 for s in states if s["warning"]),
        "contact_frames": sum(1 for s in states if s["contact_force"] > 0),
        "lost_frames": sum(1 for s in states if s["trap_lost"]),
    }
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
