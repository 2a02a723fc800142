"""The ``engine`` command: scenario runner, transcript recorder, HTTP server."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import LLM_MODES, EngineConfig, load_config
from .gateway import TranscriptStore
from .scenario import ScenarioRunner, ScriptError, load_script
from .session import SessionManager


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("run-scenario")
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--llm-mode", type=click.Choice(LLM_MODES), default=None,
              help="Override the script's llm mode.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              help="Where to write the JSON-lines event trace.")
@click.option("--workdir", type=click.Path(file_okay=False),
              help="Directory for the notebook copy the scenario mutates.")
def run_scenario_command(script, llm_mode, trace_path, workdir):
    """Run a scripted scenario; exit 0 iff every assert step passes."""
    from .scenario import run_scenario

    result = run_scenario(script, llm_mode=llm_mode, trace_path=trace_path,
                          workdir=workdir)
    if result.trace_path:
        click.echo(f"trace: {result.trace_path}")
    if result.notebook_path:
        click.echo(f"notebook: {result.notebook_path}")
    click.echo(result.message, err=result.exit_code != 0)
    sys.exit(result.exit_code)


@main.command("record")
@click.argument("notebook", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Transcript file to write.")
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False),
              help="Scenario script to drive while recording.")
def record_command(notebook, out_path, script_path):
    """Run against the live backend and capture transcripts for replay."""
    store = TranscriptStore()
    manager = SessionManager(EngineConfig(llm_mode="live"))
    manager.record_store = store
    try:
        if script_path:
            script = load_script(script_path)
            script.notebook_path = Path(notebook).resolve()
            result = ScenarioRunner(script, llm_mode="live", manager=manager).run()
            if result.exit_code != 0:
                click.echo(result.message, err=True)
                sys.exit(result.exit_code)
        else:
            manager.open_session(notebook)
    except ScriptError as exc:
        click.echo(f"script error: {exc}", err=True)
        sys.exit(2)
    finally:
        manager.close_all()
    store.export_file(out_path)
    click.echo(f"recorded {len(store)} transcript entries to {out_path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8748, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="engine.toml-style config file.")
def serve_command(host, port, config_path):
    """Serve the HTTP API and event channel."""
    import uvicorn

    from .server import create_app

    config = load_config(config_path) if config_path else EngineConfig()
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
