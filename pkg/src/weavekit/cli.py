"""Command line: serve the gateway, run one-shot pipelines, inspect plans."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config
from .errors import WeaveError
from .media import canonical_json
from .planner import derive_request_spec, plan as compose_plan
from .policy import probe_hardware, select_tier
from .registry import default_registry, load_tools_file
from .service import WeaveService

EXTENSIONS = {"abc": "abc", "smf": "mid", "wav": "wav", "svg": "svg", "pdf": "pdf", "json": "json", "plain": "txt"}
_ATTACH_TYPES = {
    ".abc": ("symbolic", "abc"),
    ".mid": ("symbolic", "smf"),
    ".midi": ("symbolic", "smf"),
    ".smf": ("symbolic", "smf"),
    ".wav": ("audio", "wav"),
    ".svg": ("image", "svg"),
    ".pdf": ("image", "pdf"),
    ".json": ("report", "json"),
    ".txt": ("text", "plain"),
}


def _shared_options(fn):
    fn = click.option("--mode", type=click.Choice(["local", "hosted"]), default="local", show_default=True)(fn)
    fn = click.option("--tier", type=click.Choice(["low", "medium", "high"]), default=None, help="Override the probed tier.")(fn)
    fn = click.option("--cache-dir", type=click.Path(), default=None, help="Artifact cache directory (or WEAVE_CACHE_DIR).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="TOML config overrides.")(fn)
    fn = click.option("--tools-file", type=click.Path(exists=True), default=None, help="Extra tools.toml registrations.")(fn)
    fn = click.option("--remote-url", default=None, help="Base URL for hosted-mode tool endpoints.")(fn)
    return fn


def _build_service(mode, tier, cache_dir, config_path, tools_file, remote_url) -> WeaveService:
    config = load_config(config_path)
    registry = default_registry(mode, remote_url)
    if tools_file:
        load_tools_file(tools_file, registry)
    return WeaveService(mode=mode, tier=tier, cache_dir=cache_dir, config=config, registry=registry)


@click.group()
def main():
    """Music-pipeline orchestration over typed tool graphs."""


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@_shared_options
def serve(port, host, mode, tier, cache_dir, config_path, tools_file, remote_url):
    """Run the REST/event gateway."""
    import uvicorn

    from .gateway import create_app

    service = _build_service(mode, tier, cache_dir, config_path, tools_file, remote_url)
    click.echo(f"gateway on http://{host}:{port} mode={service.mode} tier={service.tier}")
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


@main.command()
@click.argument("text")
@click.option("--out", type=click.Path(), default=None, help="Directory for produced artifacts.")
@click.option("--attach", "attachments", type=click.Path(exists=True), multiple=True)
@click.option("--timeout", default=120.0, show_default=True, help="Seconds to wait for completion.")
@_shared_options
def ask(text, out, attachments, timeout, mode, tier, cache_dir, config_path, tools_file, remote_url):
    """One-shot pipeline: plan, execute, write artifacts, print the report."""
    service = _build_service(mode, tier, cache_dir, config_path, tools_file, remote_url)
    session = service.create_session()
    attach_payload = []
    for path in attachments:
        suffix = Path(path).suffix.lower()
        if suffix not in _ATTACH_TYPES:
            raise click.UsageError(f"cannot infer modality/format for {path}")
        modality, fmt = _ATTACH_TYPES[suffix]
        attach_payload.append((Path(path).read_bytes(), modality, fmt))
    try:
        result = service.handle_message(session.id, text, attach_payload, wait=False)
    except WeaveError as exc:
        click.echo(canonical_json({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        sys.exit(2)
    record = service.wait_plan(result["plan_id"], timeout=timeout)
    if not record.finished.is_set():
        click.echo(canonical_json({"error": {"type": "Timeout", "message": "execution still running"}}))
        sys.exit(3)

    written = []
    if out and record.report is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for step in record.report.steps:
            if step.output:
                art = service.store.get_artifact(step.output)
                name = f"{step.node_id}-{step.tool_id.replace('.', '_')}.{EXTENSIONS[art.format]}"
                (out_dir / name).write_bytes(art.bytes)
                written.append(name)
        for goal, art_id in record.report.final_artifacts.items():
            art = service.store.get_artifact(art_id)
            name = f"final-{goal[0]}-{goal[1]}.{EXTENSIONS[art.format]}"
            (out_dir / name).write_bytes(art.bytes)
            written.append(name)
    summary = {
        "plan_id": record.plan_id,
        "status": record.status,
        "error": record.error,
        "report": record.report.canonical() if record.report else None,
        "written": written,
        "backend_calls": service.hub.calls,
    }
    click.echo(canonical_json(summary))
    sys.exit(0 if record.status == "done" else 1)


@main.command(name="plan")
@click.argument("text")
@click.option("--dry-run/--no-dry-run", default=True, show_default=True, help="Print the plan without executing.")
@_shared_options
def plan_cmd(text, dry_run, mode, tier, cache_dir, config_path, tools_file, remote_url):
    """Print the canonical PlanGraph JSON for a request."""
    if not dry_run:
        raise click.UsageError("execution requires `ask`; `plan` is always dry")
    config = load_config(config_path)
    registry = default_registry(mode, remote_url)
    if tools_file:
        load_tools_file(tools_file, registry)
    profile = probe_hardware()
    spec = derive_request_spec(text, [])
    selected = select_tier(profile, override=tier, config=config)
    graph = compose_plan(spec, registry, selected, profile, config)
    click.echo(graph.to_json())


@main.command()
@click.option("--tier", type=click.Choice(["low", "medium", "high"]), default=None)
def probe(tier):
    """Print the hardware profile and the tier it selects."""
    profile = probe_hardware()
    selected = select_tier(profile, override=tier)
    click.echo(
        canonical_json(
            {
                "accel_mem_mb": profile.accel_mem_mb,
                "host_mem_mb": profile.host_mem_mb,
                "disk_free_mb": profile.disk_free_mb,
                "tier": selected,
            }
        )
    )


@main.group()
def tools():
    """Tool registry commands."""


@tools.command(name="list")
@_shared_options
def tools_list(mode, tier, cache_dir, config_path, tools_file, remote_url):
    """Print the registered tool table."""
    registry = default_registry(mode, remote_url)
    if tools_file:
        load_tools_file(tools_file, registry)
    rows = [
        {
            "id": spec.id,
            "inputs": [f"{m}/{f}" for m, f in spec.inputs],
            "output": f"{spec.output[0]}/{spec.output[1]}",
            "kind": spec.kind,
            "backend": spec.backend,
            "cost": spec.cost_estimate,
        }
        for spec in registry.list_tools()
    ]
    click.echo(json.dumps(rows, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
