"""Thin command-line client for the lab service.

Commands post to the HTTP API and write the returned report files to the
output directory.  By default they talk to an in-process instance of the
app over an ASGI transport (no server needed, convenient for CI); pass
``--server URL`` or set PME_LAB_SERVER to target a running instance.  Exit
status is 0 exactly when every check in the invoked report passed.

PME_LAB_THREADS, when set, caps the numerical libraries' internal thread
pools; it must take effect before numpy loads, so the heavy imports happen
lazily inside the commands.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click


def _cap_threads() -> None:
    cap = os.environ.get("PME_LAB_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _client(server: str | None):
    import httpx

    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process invocation of the service app over a synchronous ASGI portal
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _load_config(path: str, seed: int | None, tolerance_scale: float | None) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if seed is not None:
        raw["seed"] = seed
    if tolerance_scale is not None:
        for block in ("entropy", "harnack"):
            block_cfg = raw.setdefault(block, {})
            block_cfg["tolerance_scale"] = tolerance_scale * float(block_cfg.get("tolerance_scale", 10.0))
    return raw


def _write_files(files: dict, out: str, quiet: bool) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in sorted(files.items()):
        (out_dir / name).write_text(content, encoding="utf-8", newline="")
        if not quiet:
            click.echo(f"wrote {out_dir / name}")


def _format_validation_error(detail) -> str:
    lines = []
    for item in detail if isinstance(detail, list) else [detail]:
        loc = item.get("loc", []) if isinstance(item, dict) else []
        keys = [str(k) for k in loc if k not in ("body", "config")]
        msg = item.get("msg", str(item)) if isinstance(item, dict) else str(item)
        lines.append(f"{'.'.join(keys) or 'config'}: {msg}")
    return "\n".join(lines)


def _post(endpoint: str, payload: dict, server: str | None, out: str, quiet: bool) -> int:
    _cap_threads()
    with _client(server) as client:
        resp = client.post(endpoint, json=payload)
        if resp.status_code == 422:
            click.echo("invalid configuration:", err=True)
            click.echo(_format_validation_error(resp.json().get("detail")), err=True)
            return 2
        resp.raise_for_status()
        body = resp.json()
    _write_files(body["files"], out, quiet)
    passed = bool(body["passed"])
    if not quiet:
        click.echo(f"[{'PASS' if passed else 'FAIL'}] {endpoint.lstrip('/')}")
    return 0 if passed else 1


_config_opt = click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
_out_opt = click.option("--out", "out", default="out", show_default=True, help="Directory for report files.")
_seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
_tol_opt = click.option("--tolerance-scale", type=float, default=None, help="Multiply check tolerances by this factor.")
_quiet_opt = click.option("--quiet", is_flag=True, default=False)
_server_opt = click.option("--server", default=None, envvar="PME_LAB_SERVER", help="Remote service URL (default: in-process).")


@click.group()
def main() -> None:
    """Porous-medium-equation laboratory: simulate and verify."""


def _config_command(name: str, endpoint: str, help_text: str):
    @main.command(name=name, help=help_text)
    @_config_opt
    @_out_opt
    @_seed_opt
    @_tol_opt
    @_quiet_opt
    @_server_opt
    def cmd(config_path, out, seed, tolerance_scale, quiet, server):
        payload = {"config": _load_config(config_path, seed, tolerance_scale)}
        sys.exit(_post(endpoint, payload, server, out, quiet))

    return cmd


_config_command("simulate", "/simulate", "Run the flow and export trajectory diagnostics.")
_config_command("entropy-report", "/entropy-report", "Verify entropy monotonicity along the configured run.")
_config_command("harnack-check", "/harnack-check", "Verify pointwise and integrated gradient estimates.")
_config_command("warped-verify", "/warped-verify", "Verify the warped-product identities.")
_config_command("all-checks", "/all-checks", "Run the full verification suite for a config.")


@main.command("schedule-table", help="Tabulate schedule and estimate coefficients on a time grid.")
@click.option("--gamma", type=float, required=True)
@click.option("--dim-param", type=float, required=True)
@click.option("--kappa", type=float, required=True)
@click.option("--family", type=click.Choice(["power2", "sinh2"]), default="power2", show_default=True)
@click.option("--times", required=True, help="Comma-separated evaluation times.")
@_out_opt
@_quiet_opt
@_server_opt
def schedule_table(gamma, dim_param, kappa, family, times, out, quiet, server):
    payload = {
        "gamma": gamma,
        "dim_param": dim_param,
        "kappa": kappa,
        "family": family,
        "times": [float(t) for t in times.split(",") if t.strip()],
    }
    sys.exit(_post("/schedule-table", payload, server, out, quiet))


@main.command("serve", help="Run the HTTP service with uvicorn.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    _cap_threads()
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
