"""Command line: serve the twin, run the batch studies, fit, replay.

Every study subcommand writes a CSV with a documented header plus a JSON
summary next to it (``<out>.summary.json`` unless ``--summary`` says
otherwise), and can alternatively run against a live server with
``--server URL`` instead of computing locally.
"""

from __future__ import annotations

import asyncio
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .experiments import (
    CONSISTENCY_CSV_HEADER,
    REFERENCE_PARAMS,
    ROTATION_CSV_HEADER,
    TRIALS_CSV_HEADER,
    RotationStudyConfig,
    StudyError,
    default_delivery_policies,
    delivery_summary_dict,
    load_corridor_scenario,
    run_consistency_study,
    run_delivery_study,
    run_rotation_study,
    spearman_rho,
    write_consistency_csv,
    write_rotation_csv,
    write_trials_csv,
)
from .force_model import (
    FitError,
    fit_piecewise,
    params_to_dict,
    read_force_samples,
    read_params,
    write_params,
)
from .logs import LogError, TrialLog, summarize
from .policies import PolicyError
from .scenario import ScenarioError, load_scenario
from .session import ReplayError, replay


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _summary_path(out: Path, override: Optional[Path]) -> Path:
    return override if override is not None else out.with_suffix(out.suffix + ".summary.json")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    url = server.rstrip("/") + route
    resp = httpx.post(url, json=payload, timeout=600.0)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        _fail(f"{url} returned {resp.status_code}: {detail}")
    return resp.json()


@click.group()
@click.version_option(version=__version__, prog_name="ottwin")
def cli() -> None:
    """Digital-twin teleoperation service and experiment harness."""


# ---------------------------------------------------------------------------
# serve


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--port",
    default=8700,
    show_default=True,
    envvar="OTTWIN_PORT",
    help="HTTP/WebSocket port (env OTTWIN_PORT).",
)
@click.option(
    "--tcp-port",
    default=8701,
    show_default=True,
    envvar="OTTWIN_TCP_PORT",
    help="Raw newline-JSON socket port (env OTTWIN_TCP_PORT); 0 disables.",
)
@click.option(
    "--scenario",
    "scenario_path",
    type=click.Path(exists=True, path_type=Path),
    required=True,
    help="Scenario JSON file, or a directory of them.",
)
@click.option(
    "--headless",
    is_flag=True,
    help="Lockstep virtual clock (input timestamps drive time) instead of wall-clock 60 Hz.",
)
@click.option(
    "--log-dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Write finished trial logs here.",
)
def serve(
    host: str,
    port: int,
    tcp_port: int,
    scenario_path: Path,
    headless: bool,
    log_dir: Optional[Path],
) -> None:
    """Host live teleoperation sessions over WebSocket and raw TCP."""
    import uvicorn

    from .service import create_app
    from .service.tcp import serve_tcp

    app = create_app(scenario_path=scenario_path, log_dir=log_dir, headless=headless)

    # the TCP listener serves the store's default (first) scenario
    default_scenario = app.state.store.resolve(None)

    async def run() -> None:
        config = uvicorn.Config(app, host=host, port=port, log_level="info")
        server = uvicorn.Server(config)
        if tcp_port:
            tcp_server = await serve_tcp(
                host,
                tcp_port,
                default_scenario,
                registry=app.state.registry,
                headless=headless,
                log_dir=log_dir,
            )
            click.echo(f"raw socket on {host}:{tcp_port} ({default_scenario.name})")
            async with tcp_server:
                await server.serve()
        else:
            await server.serve()

    asyncio.run(run())


# ---------------------------------------------------------------------------
# studies


@cli.command()
@click.option("--strategy", type=click.Choice(["A", "B"]), default="A", show_default=True)
@click.option(
    "--dstar",
    "d_star_values",
    type=float,
    multiple=True,
    help="Trap spacing value (repeat >= 5 times); default 2..6 µm.",
)
@click.option("--m", "power_ratio_m", default=1.5, show_default=True, help="Power ratio (strategy B).")
@click.option("--settle", "settle_time", default=2.0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("rotation.csv"), show_default=True)
@click.option("--summary", type=click.Path(path_type=Path), default=None)
@click.option("--server", default=None, help="Run on this server instead of locally.")
def rotation(
    strategy: str,
    d_star_values: tuple[float, ...],
    power_ratio_m: float,
    settle_time: float,
    out: Path,
    summary: Optional[Path],
    server: Optional[str],
) -> None:
    """Steady out-of-plane angle θ versus trap spacing d*."""
    values = d_star_values or (2.0, 3.0, 4.0, 5.0, 6.0)
    if server is not None:
        data = _post(
            server,
            "/experiments/rotation",
            {
                "strategy": strategy,
                "d_star_values": list(values),
                "power_ratio_m": power_ratio_m,
                "settle_time": settle_time,
            },
        )
        rows = data["rows"]
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ROTATION_CSV_HEADER)
            for r in rows:
                w.writerow(
                    [repr(r["d_star"]), repr(r["theta_deg"]), int(r["converged"]), repr(r["settle_s"])]
                )
        pairs = [(r["d_star"], r["theta_deg"]) for r in rows]
        converged = sum(1 for r in rows if r["converged"])
    else:
        try:
            cfg = RotationStudyConfig(
                strategy=strategy,
                d_star_values=tuple(values),
                power_ratio_m=power_ratio_m,
                settle_time=settle_time,
            )
            result = run_rotation_study(cfg)
        except StudyError as exc:
            _fail(str(exc))
        write_rotation_csv(result, out)
        pairs = [(r.d_star, r.theta_deg) for r in result]
        converged = sum(1 for r in result if r.converged)

    rho = spearman_rho([p[0] for p in pairs], [p[1] for p in pairs])
    payload = {
        "strategy": strategy,
        "n_rows": len(pairs),
        "n_converged": converged,
        "spearman_d_star_theta": rho,
        "theta_deg": {f"{d:g}": t for d, t in pairs},
        "csv": str(out),
    }
    _write_json(_summary_path(out, summary), payload)
    click.echo(f"{len(pairs)} rows -> {out}  (spearman {rho:+.3f})")


@cli.command()
@click.option(
    "--params",
    "params_path",
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help="Force-params JSON; default: built-in reference set.",
)
@click.option("--ideal", is_flag=True, help="Park the trap at each grid point, damping off.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("consistency.csv"), show_default=True)
@click.option("--summary", type=click.Path(path_type=Path), default=None)
@click.option("--server", default=None, help="Run on this server instead of locally.")
def consistency(
    params_path: Optional[Path],
    ideal: bool,
    out: Path,
    summary: Optional[Path],
    server: Optional[str],
) -> None:
    """Rendered-force versus model sweeps along the beam and radial axes."""
    if server is not None:
        body: dict = {"ideal": ideal}
        if params_path is not None:
            body["params"] = params_to_dict(read_params(params_path))
        data = _post(server, "/experiments/consistency", body)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CONSISTENCY_CSV_HEADER)
            for r in data["rows"]:
                w.writerow(
                    [r["axis"], repr(r["r_target"]), repr(r["r"]), repr(r["f_rendered"]), repr(r["f_model"])]
                )
        axial, radial = data["axial"], data["radial"]
    else:
        params = read_params(params_path) if params_path is not None else REFERENCE_PARAMS
        try:
            result = run_consistency_study(params, ideal=ideal)
        except StudyError as exc:
            _fail(str(exc))
        write_consistency_csv(result, out)
        axial = {"mse": result.axial.mse, "rmse": result.axial.rmse, "r2": result.axial.r2}
        radial = {"mse": result.radial.mse, "rmse": result.radial.rmse, "r2": result.radial.r2}

    payload = {"mode": "ideal" if ideal else "sweep", "axial": axial, "radial": radial, "csv": str(out)}
    _write_json(_summary_path(out, summary), payload)
    click.echo(
        f"axial R2 {axial['r2']:.4f}  radial R2 {radial['r2']:.4f} -> {out}"
    )


@cli.command()
@click.option(
    "--scenario",
    "scenario_path",
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help="Scenario JSON; default: built-in constriction corridor.",
)
@click.option("--trials", default=10, show_default=True, help="Trials per condition.")
@click.option("--seed", "base_seed", default=1000, show_default=True, help="Base seed; trial k uses seed+k.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    default=Path("delivery-out"),
    show_default=True,
    help="Output directory: trials.csv, summary.json, logs/.",
)
@click.option("--server", default=None, help="Run on this server instead of locally.")
def delivery(
    scenario_path: Optional[Path],
    trials: int,
    base_seed: int,
    out_dir: Path,
    server: Optional[str],
) -> None:
    """Force-blind versus force-aware scripted delivery comparison."""
    out_dir.mkdir(parents=True, exist_ok=True)
    trials_csv = out_dir / "trials.csv"
    summary_json = out_dir / "summary.json"

    if server is not None:
        body: dict = {"trials_per_condition": trials, "base_seed": base_seed}
        if scenario_path is not None:
            body["scenario"] = json.loads(Path(scenario_path).read_text())
        data = _post(server, "/experiments/delivery", body)
        rows = data.pop("trials")
        with open(trials_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRIALS_CSV_HEADER)
            for r in rows:
                w.writerow(
                    [
                        r["condition"],
                        r["trial"],
                        r["seed"],
                        r["reason"],
                        int(r["success"]),
                        repr(r["duration_s"]),
                        repr(r["contact_mean"]),
                        repr(r["contact_max"]),
                    ]
                )
        _write_json(summary_json, data)
        reductions = data["reductions_blind_to_aware"]
    else:
        try:
            scenario = (
                load_scenario(scenario_path)
                if scenario_path is not None
                else load_corridor_scenario()
            )
        except ScenarioError as exc:
            _fail(str(exc))
        blind, aware = default_delivery_policies()
        try:
            result = run_delivery_study(
                scenario, blind, aware, trials_per_condition=trials, base_seed=base_seed
            )
        except (StudyError, PolicyError) as exc:
            _fail(str(exc))
        write_trials_csv(result.trial_rows, trials_csv)
        _write_json(summary_json, delivery_summary_dict(result))
        log_root = out_dir / "logs"
        log_root.mkdir(exist_ok=True)
        for name, logs in (("blind", result.blind_logs), ("aware", result.aware_logs)):
            for k, log in enumerate(logs):
                log.write(log_root / f"{name}-{k:02d}.jsonl")
        reductions = delivery_summary_dict(result)["reductions_blind_to_aware"]

    click.echo(
        "contact mean reduction {:+.1f}%  sd reduction {:+.1f}% -> {}".format(
            100.0 * reductions["contact_mean"],
            100.0 * reductions["contact_sd"],
            out_dir,
        )
    )


# ---------------------------------------------------------------------------
# utilities


@cli.command()
@click.option(
    "--samples",
    "samples_path",
    type=click.Path(exists=True, path_type=Path),
    required=True,
    help="CSV of r_um,force_pN magnitude samples.",
)
@click.option("--cutoff", type=float, default=None, help="Override the fitted cutoff radius.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("params.json"), show_default=True)
def fit(samples_path: Path, cutoff: Optional[float], out: Path) -> None:
    """Fit piecewise force-law parameters to magnitude samples."""
    try:
        samples = read_force_samples(samples_path)
        params = fit_piecewise(samples, cutoff_override=cutoff)
    except (FitError, OSError, ValueError) as exc:
        _fail(str(exc))
    write_params(params, out)
    click.echo(json.dumps(params_to_dict(params), indent=2, sort_keys=True))


@cli.command("replay")
@click.option("--log", "log_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, path_type=Path), required=True)
def replay_cmd(log_path: Path, scenario_path: Path) -> None:
    """Re-run a trial log and verify it reproduces byte-identically."""
    try:
        log = TrialLog.read(log_path)
        scenario = load_scenario(scenario_path)
    except (LogError, ScenarioError) as exc:
        _fail(str(exc))
    try:
        rerun = replay(log, scenario)
    except ReplayError as exc:
        _fail(str(exc))
    if rerun.to_jsonl() == log.to_jsonl():
        click.echo(f"replay OK: {len(log.records)} records reproduced byte-identically")
    else:
        click.echo("replay MISMATCH: re-run diverged from the recorded log", err=True)
        sys.exit(1)


@cli.command("summarize")
@click.argument("logs", nargs=-1, type=click.Path(exists=True, path_type=Path), required=True)
def summarize_cmd(logs: tuple[Path, ...]) -> None:
    """Pooled metrics (mean/SD contact force and trap distance) over logs."""
    try:
        parsed = [TrialLog.read(p) for p in logs]
        summary = summarize(parsed)
    except (LogError, ValueError) as exc:
        _fail(str(exc))
    click.echo(
        json.dumps(
            {
                "n_trials": summary.n_trials,
                "n_records": summary.n_records,
                "success_rate": summary.success_rate,
                "contact_mean": summary.contact_mean,
                "contact_sd": summary.contact_sd,
                "distance_mean": summary.distance_mean,
                "distance_sd": summary.distance_sd,
            },
            indent=2,
            sort_keys=True,
        )
    )


main = cli

if __name__ == "__main__":
    main()
