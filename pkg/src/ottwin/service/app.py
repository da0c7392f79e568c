"""HTTP + WebSocket service face.

Endpoints:

* ``GET  /health`` — liveness.
* ``GET  /scenarios`` — names and config hashes of the hosted documents.
* ``POST /scenarios/validate`` — validate an inline document.
* ``POST /force/fit`` — fit piecewise params to (r, F) magnitude samples.
* ``POST /sessions`` — create a session; connect via the returned paths.
* ``WS   /sessions/{sid}/operator`` / ``.../observe`` — protocol streams.
* ``WS   /ws/operator?scenario=…&seed=…&headless=…`` — create + attach in
  one step (what the browser console uses).
* ``GET  /sessions/{sid}`` / ``.../log`` — status and the finished log.
* ``POST /replay`` — verify a log reproduces byte-identically.
* ``POST /experiments/{rotation,consistency,delivery}`` — batch studies.

The WebSocket transport carries the same newline-delimited JSON protocol as
the raw TCP listener, one message per text frame.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .. import __version__
from ..experiments import (
    RotationStudyConfig,
    StudyError,
    default_delivery_policies,
    delivery_summary_dict,
    load_corridor_scenario,
    run_consistency_study,
    run_delivery_study,
    run_rotation_study,
)
from ..force_model import (
    FitError,
    ForceSample,
    fit_piecewise,
    params_from_dict,
    params_to_dict,
)
from ..logs import LogError, TrialLog
from ..policies import OperatorPolicy, PolicyError
from ..scenario import Scenario, ScenarioError, load_scenario
from ..session import ReplayError, SessionPhase, replay
from .live import LiveSession, SessionRegistry


class ScenarioStore:
    """Scenario documents hosted by this server: one file or a directory."""

    def __init__(self, source: Optional[Path]):
        self.source = Path(source) if source is not None else None

    def paths(self) -> list[Path]:
        if self.source is None:
            return []
        if self.source.is_dir():
            return sorted(self.source.glob("*.json"))
        return [self.source]

    def listing(self) -> list[dict]:
        out = []
        for path in self.paths():
            try:
                scenario = load_scenario(path)
            except ScenarioError as exc:
                out.append({"file": path.name, "error": str(exc)})
                continue
            out.append(
                {
                    "name": scenario.name,
                    "file": path.name,
                    "config_hash": scenario.config_hash,
                }
            )
        return out

    def resolve(self, ref: Union[str, dict, None]) -> Scenario:
        """name → hosted document; dict → inline; None → sole/first hosted."""
        if isinstance(ref, dict):
            return load_scenario(ref)
        candidates = self.paths()
        if not candidates:
            raise ScenarioError("server hosts no scenario files")
        if ref is None:
            return load_scenario(candidates[0])
        for path in candidates:
            try:
                scenario = load_scenario(path)
            except ScenarioError:
                continue
            if scenario.name == ref or path.stem == ref:
                return scenario
        raise ScenarioError(f"no hosted scenario named {ref!r}")


# -- request bodies ---------------------------------------------------------


class ValidateRequest(BaseModel):
    document: dict


class FitRequest(BaseModel):
    samples: list[tuple[float, float]] = Field(min_length=1)
    cutoff_r_max: Optional[float] = None


class SessionRequest(BaseModel):
    scenario: Union[str, dict, None] = None
    seed: Optional[int] = None
    headless: bool = True


class ReplayRequest(BaseModel):
    log: str
    scenario: Union[str, dict, None] = None


class RotationRequest(BaseModel):
    strategy: Literal["A", "B"] = "A"
    d_star_values: list[float] = [2.0, 3.0, 4.0, 5.0, 6.0]
    power_ratio_m: float = 1.5
    settle_time: float = 2.0
    rate_threshold: float = 1e-4


class ConsistencyRequest(BaseModel):
    params: Optional[dict] = None  # default: the bench reference set
    grid: Optional[list[float]] = None
    ideal: bool = False


class DeliveryRequest(BaseModel):
    scenario: Union[str, dict, None] = None
    trials_per_condition: int = Field(default=10, ge=2)
    base_seed: int = 1000
    nominal_speed: Optional[float] = None
    slowdown_gain: Optional[float] = None


def create_app(
    *,
    scenario_path: Optional[Path] = None,
    log_dir: Optional[Path] = None,
    headless: bool = True,
) -> FastAPI:
    app = FastAPI(title="ottwin", version=__version__)
    store = ScenarioStore(scenario_path)
    registry = SessionRegistry()
    app.state.store = store
    app.state.registry = registry
    app.state.log_dir = Path(log_dir) if log_dir is not None else None
    app.state.headless = headless

    def resolve_or_422(ref) -> Scenario:
        try:
            return store.resolve(ref)
        except ScenarioError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    # -- meta ---------------------------------------------------------------

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "name": "ottwin", "version": __version__}

    @app.get("/scenarios")
    def scenarios() -> list[dict]:
        return store.listing()

    @app.post("/scenarios/validate")
    def validate(req: ValidateRequest) -> dict:
        try:
            scenario = load_scenario(req.document)
        except ScenarioError as exc:
            return {"valid": False, "error": str(exc)}
        return {
            "valid": True,
            "name": scenario.name,
            "config_hash": scenario.config_hash,
        }

    @app.post("/force/fit")
    def fit(req: FitRequest) -> dict:
        samples = [
            ForceSample(displacement_r=r, force_magnitude=f) for r, f in req.samples
        ]
        try:
            params = fit_piecewise(samples, cutoff_override=req.cutoff_r_max)
        except FitError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"params": params_to_dict(params), "n_samples": len(samples)}

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions")
    def create_session(req: SessionRequest) -> dict:
        scenario = resolve_or_422(req.scenario)
        session = registry.create(
            scenario,
            seed=req.seed,
            headless=req.headless if req.headless is not None else app.state.headless,
            log_dir=app.state.log_dir,
        )
        sid = session.session_id
        return {
            "session": sid,
            "scenario": scenario.name,
            "config_hash": scenario.config_hash,
            "operator_path": f"/sessions/{sid}/operator",
            "observe_path": f"/sessions/{sid}/observe",
        }

    def session_or_404(sid: str) -> LiveSession:
        session = registry.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {sid!r}")
        return session

    @app.get("/sessions/{sid}")
    def session_status(sid: str) -> dict:
        session = session_or_404(sid)
        return {
            "session": sid,
            "scenario": session.scenario.name,
            "phase": session.phase.value,
            "frame": session.engine.frame,
            "tick": session.engine.world.tick,
            "operator_attached": session.operator_attached,
            "log_file": str(session.log_path) if session.log_path else None,
        }

    @app.get("/sessions/{sid}/log")
    def session_log(sid: str) -> PlainTextResponse:
        session = session_or_404(sid)
        if session.log is None:
            raise HTTPException(status_code=409, detail="trial has not ended")
        return PlainTextResponse(
            session.log.to_jsonl(), media_type="application/x-ndjson"
        )

    @app.post("/replay")
    def replay_log(req: ReplayRequest) -> dict:
        scenario = resolve_or_422(req.scenario)
        try:
            log = TrialLog.from_jsonl(req.log)
        except LogError as exc:
            raise HTTPException(status_code=422, detail=f"log: {exc}")
        try:
            rerun = replay(log, scenario)
        except ReplayError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {
            "match": rerun.to_jsonl() == log.to_jsonl(),
            "records": len(log.records),
        }

    # -- websocket transports ----------------------------------------------

    async def pump_queue(ws: WebSocket, queue: asyncio.Queue) -> None:
        while True:
            item = await queue.get()
            if item is None:
                break
            try:
                await ws.send_text(item)
            except Exception:
                return

    async def operate(ws: WebSocket, session: LiveSession) -> None:
        try:
            queue, hello = session.attach_operator()
        except RuntimeError as exc:
            await ws.accept()
            await ws.close(code=1008, reason=str(exc))
            return
        await ws.accept()
        await ws.send_text(hello)
        pump = asyncio.create_task(pump_queue(ws, queue))
        try:
            while True:
                session.handle_line(await ws.receive_text())
        except WebSocketDisconnect:
            session.operator_gone()
        finally:
            if session.phase is SessionPhase.ENDED:
                await pump
            else:
                pump.cancel()
            session.detach(queue)

    @app.websocket("/sessions/{sid}/operator")
    async def ws_operator(ws: WebSocket, sid: str) -> None:
        session = registry.get(sid)
        if session is None:
            await ws.accept()
            await ws.close(code=1008, reason=f"no session {sid!r}")
            return
        await operate(ws, session)

    @app.websocket("/ws/operator")
    async def ws_operator_direct(
        ws: WebSocket,
        scenario: Optional[str] = None,
        seed: Optional[int] = None,
        headless: bool = True,
    ) -> None:
        try:
            resolved = store.resolve(scenario)
        except ScenarioError as exc:
            await ws.accept()
            await ws.close(code=1008, reason=str(exc))
            return
        session = registry.create(
            resolved, seed=seed, headless=headless, log_dir=app.state.log_dir
        )
        await operate(ws, session)

    @app.websocket("/sessions/{sid}/observe")
    async def ws_observe(ws: WebSocket, sid: str) -> None:
        session = registry.get(sid)
        if session is None:
            await ws.accept()
            await ws.close(code=1008, reason=f"no session {sid!r}")
            return
        queue, hello = session.attach_observer()
        await ws.accept()
        await ws.send_text(hello)
        pump = asyncio.create_task(pump_queue(ws, queue))
        try:
            while True:
                await ws.receive_text()  # observers send nothing we act on
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            session.detach(queue)

    # -- batch studies ------------------------------------------------------

    @app.post("/experiments/rotation")
    def rotation(req: RotationRequest) -> dict:
        try:
            cfg = RotationStudyConfig(
                strategy=req.strategy,
                d_star_values=tuple(req.d_star_values),
                power_ratio_m=req.power_ratio_m,
                settle_time=req.settle_time,
                rate_threshold=req.rate_threshold,
            )
        except StudyError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        rows = run_rotation_study(cfg)
        return {
            "strategy": req.strategy,
            "rows": [
                {
                    "d_star": r.d_star,
                    "theta_deg": r.theta_deg,
                    "converged": r.converged,
                    "settle_s": r.settle_s,
                }
                for r in rows
            ],
        }

    @app.post("/experiments/consistency")
    def consistency(req: ConsistencyRequest) -> dict:
        if req.params is not None:
            try:
                params = params_from_dict(req.params)
            except (KeyError, TypeError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=f"params: {exc}")
        else:
            from ..experiments import REFERENCE_PARAMS as params  # noqa: N813
        try:
            result = run_consistency_study(params, grid=req.grid, ideal=req.ideal)
        except StudyError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        def stats(s):
            return {"mse": s.mse, "rmse": s.rmse, "r2": s.r2}
        return {
            "axial": stats(result.axial),
            "radial": stats(result.radial),
            "rows": [
                {
                    "axis": r.axis,
                    "r_target": r.r_target,
                    "r": r.r,
                    "f_rendered": r.f_rendered,
                    "f_model": r.f_model,
                }
                for r in result.rows
            ],
        }

    @app.post("/experiments/delivery")
    def delivery(req: DeliveryRequest) -> dict:
        if req.scenario is None:
            scenario = load_corridor_scenario()
        else:
            scenario = resolve_or_422(req.scenario)
        kwargs = {}
        if req.nominal_speed is not None:
            kwargs["nominal_speed"] = req.nominal_speed
        if req.slowdown_gain is not None:
            kwargs["slowdown_gain"] = req.slowdown_gain
        try:
            blind, aware = default_delivery_policies(**kwargs)
            result = run_delivery_study(
                scenario,
                blind,
                aware,
                trials_per_condition=req.trials_per_condition,
                base_seed=req.base_seed,
            )
        except (StudyError, PolicyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        summary = delivery_summary_dict(result)
        summary["trials"] = [
            {
                "condition": r.condition,
                "trial": r.trial,
                "seed": r.seed,
                "reason": r.reason,
                "success": r.success,
                "duration_s": r.duration_s,
                "contact_mean": r.contact_mean,
                "contact_max": r.contact_max,
            }
            for r in result.trial_rows
        ]
        return summary

    return app
