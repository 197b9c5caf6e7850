"""Command line front end: one subcommand per pipeline stage plus serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import ServiceConfig
from .errors import BurnscopeError
from .pipeline import PipelineContext
from .store import SessionStore


@click.group()
@click.option("--store", "store_dir", default="./burnscope-store", show_default=True,
              help="Session store root directory.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="Service configuration JSON.")
@click.option("--seed", default=None, type=int,
              help="Fix all stochastic stages (RANSAC sampling).")
@click.pass_context
def main(ctx, store_dir, config_path, seed):
    """Multi-view 3D burn assessment pipeline."""
    config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    if seed is not None:
        config.seed = seed
    ctx.obj = PipelineContext(
        store=SessionStore(store_dir),
        config=config,
        rng=np.random.default_rng(config.seed),
    )


def _run(ctx_obj: PipelineContext, stage: str, session_id: str) -> None:
    try:
        session = ctx_obj.store.load_session(session_id)
        ctx_obj.run_stage(stage, session)
        click.echo(f"{stage}: ok")
    except BurnscopeError as exc:
        click.echo(f"{stage}: failed: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.pass_obj
def qc(obj, session_id):
    """Gate the session's images on resolution, blur, and exposure."""
    try:
        session = obj.store.load_session(session_id)
        session = obj.run_stage("qc", session)
        for view in session.views:
            verdict = "accepted" if view.qc and view.qc.accepted else "rejected"
            reasons = "; ".join(view.qc.reasons) if view.qc else ""
            click.echo(f"{view.view_id}: {verdict} {reasons}".rstrip())
    except BurnscopeError as exc:
        click.echo(f"qc: failed: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.pass_obj
def features(obj, session_id):
    """Detect keypoints and compute descriptors for every accepted view."""
    _run(obj, "features", session_id)


@main.command()
@click.argument("session_id")
@click.pass_obj
def reconstruct(obj, session_id):
    """Recover camera poses and the sparse cloud (incremental SfM)."""
    _run(obj, "sfm", session_id)


@main.command()
@click.argument("session_id")
@click.pass_obj
def scale(obj, session_id):
    """Apply metric scale from the designated reference pixel pair."""
    _run(obj, "scale", session_id)


@main.command()
@click.argument("session_id")
@click.pass_obj
def paint(obj, session_id):
    """Project burn masks onto the mesh with occlusion-aware fusion."""
    _run(obj, "paint", session_id)


@main.command()
@click.argument("session_id")
@click.pass_obj
def metrics(obj, session_id):
    """Compute area, perimeter, depth proxy, volume proxy, and TBSA."""
    try:
        session = obj.store.load_session(session_id)
        session = obj.run_stage("metrics", session)
        click.echo(json.dumps(session.metrics.to_dict(), indent=2))
    except BurnscopeError as exc:
        click.echo(f"metrics: failed: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.pass_obj
def align(obj, session_id):
    """Rigidly align this session's mesh to the patient's baseline session."""
    _run(obj, "align", session_id)


@main.command()
@click.argument("patient_id")
@click.option("--out", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
@click.pass_obj
def deltas(obj, patient_id, out):
    """Healing series for a patient as a delimited table."""
    try:
        series = obj.patient_series(patient_id)
        if series is None:
            click.echo("no sessions with metrics", err=True)
            sys.exit(1)
        table = series.to_delimited()
        if out:
            Path(out).write_text(table)
            click.echo(f"wrote {out}")
        else:
            click.echo(table, nl=False)
    except BurnscopeError as exc:
        click.echo(f"deltas: failed: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.pass_obj
def report(obj, session_id):
    """Generate and persist the clinical report (JSON + HTML)."""
    try:
        session = obj.store.load_session(session_id)
        session = obj.run_stage("report", session)
        click.echo(f"report v{session.report.version} hash {session.report.content_hash}")
    except BurnscopeError as exc:
        click.echo(f"report: failed: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8077, show_default=True, type=int)
@click.pass_obj
def serve(obj, host, port):
    """Run the HTTP JSON service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(obj.store.root, obj.config)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
