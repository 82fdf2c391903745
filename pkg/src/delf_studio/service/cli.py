"""Command-line front end.

Exit codes: 0 the command succeeded (for workflow steps: the step advanced),
1 a domain failure (rejected reply, failed validation, bad fixture, scenario
divergence), 2 a usage error. Configuration comes from --config or the
DELF_CONFIG environment variable; see service.config for the file format.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import click

from ..analysis.mdp import InvalidMdp, load_mdp_fixture, optimal_return, save_mdp_fixture
from ..analysis.keylock import generate_keylock
from ..analysis.sufficiency import (
    BudgetExceeded,
    DEFAULT_BUDGET,
    DEFAULT_DELTA,
    is_necessary_action,
    is_necessary_observation,
    is_sufficient,
    is_sufficient_action,
)
from ..design_schema import DesignDocumentError, InvalidDesignChoice, from_document, to_document
from ..ice_session import (
    Phase,
    SessionError,
    SessionState,
    metrics_for,
    phase_label,
)
from ..llm_gateway import GatewayError
from ..sandbox_executor import HarnessError
from .config import ConfigError, StudioConfig, build_engine, load_config
from .replay import ScenarioError, replay_scenario
from .reporting import write_report

_DOMAIN_ERRORS = (
    SessionError,
    GatewayError,
    HarnessError,
    ConfigError,
    ScenarioError,
    InvalidMdp,
    BudgetExceeded,
    InvalidDesignChoice,
    DesignDocumentError,
    OSError,
    ValueError,
)


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _config(ctx: click.Context) -> StudioConfig:
    try:
        return load_config(ctx.obj)
    except ConfigError as exc:
        raise _fail(str(exc)) from exc


def _engine(ctx: click.Context, need_backend: bool = True):
    try:
        engine = build_engine(
            _config(ctx), need_backend=need_backend, persistent_cursor=True
        )
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    # Replay backends hold a transcript lock; release it when the command ends
    # rather than at process exit.
    close = getattr(engine.backend, "close", None)
    if close is not None:
        ctx.call_on_close(close)
    return engine


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Studio config file (JSON); falls back to $DELF_CONFIG, then defaults.",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    """Design, codify, validate, and analyze RL environment representations."""
    ctx.obj = config_path


# ---------------------------------------------------------------------------
# Workflow commands


@main.command()
@click.option("--description", "text", default=None, help="Task description, inline.")
@click.option(
    "--description-file",
    "description_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Task description, from a file.",
)
@click.pass_context
def init(ctx: click.Context, text: str | None, description_file: str | None):
    """Create a session from a task description and print its id."""
    if (text is None) == (description_file is None):
        raise click.UsageError("provide exactly one of --description or --description-file")
    if description_file is not None:
        text = Path(description_file).read_text(encoding="utf-8")
    engine = _engine(ctx, need_backend=False)
    try:
        state = engine.create_session(text or "")
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    click.echo(state.session_id)


def _echo_design(state: SessionState) -> None:
    observation, action = state.design_history[-1].observation, state.design_history[-1].action
    click.echo(json.dumps({"observation": to_document(observation), "action": to_document(action)}, indent=2))


@main.command()
@click.argument("session_id")
@click.option("--feedback", default=None, help="Submit feedback before re-proposing.")
@click.pass_context
def design(ctx: click.Context, session_id: str, feedback: str | None):
    """Query the model for a design proposal (or a revision after feedback)."""
    engine = _engine(ctx)
    try:
        if feedback is not None:
            engine.submit_feedback(session_id, feedback)
        state = engine.propose_design(session_id)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    last = state.events[-1]
    if last.kind == "reply-rejected":
        click.echo(f"reply rejected ({last.detail}); phase: {phase_label(state)}", err=True)
        sys.exit(1)
    _echo_design(state)
    click.echo(f"phase: {phase_label(state)}")


@main.command()
@click.argument("session_id")
@click.option(
    "--edited",
    "edited_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with edited 'observation' and 'action' design documents.",
)
@click.pass_context
def approve(ctx: click.Context, session_id: str, edited_path: str | None):
    """Approve the proposed design, optionally replacing it with edits."""
    engine = _engine(ctx, need_backend=False)
    edited = None
    if edited_path is not None:
        try:
            data = json.loads(Path(edited_path).read_text(encoding="utf-8"))
            edited = (from_document(data["observation"]), from_document(data["action"]))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise _fail(f"cannot read edited design: {exc}") from exc
    try:
        state = engine.approve_design(session_id, edited)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    click.echo(f"phase: {phase_label(state)}")


@main.command()
@click.argument("session_id")
@click.pass_context
def codify(ctx: click.Context, session_id: str):
    """Query the model to turn the approved design into environment code."""
    engine = _engine(ctx)
    try:
        state = engine.codify(session_id)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    last = state.events[-1]
    if last.kind == "codify-rejected":
        click.echo(f"reply rejected ({last.detail}); phase: {phase_label(state)}", err=True)
        sys.exit(1)
    click.echo(f"code version {len(state.code_versions)} ({state.code_versions[-1].origin})")
    click.echo(f"phase: {phase_label(state)}")


@main.command()
@click.argument("session_id")
@click.pass_context
def validate(ctx: click.Context, session_id: str):
    """Run the harness on the latest candidate; auto-debug on failure."""
    engine = _engine(ctx)
    try:
        state = engine.validate(session_id)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    report = state.reports[-1]
    click.echo(f"verdict: {report.verdict}")
    if not report.passed:
        click.echo(report.failure_text(), err=True)
    click.echo(f"phase: {phase_label(state)}")
    if state.phase is not Phase.EXECUTABLE:
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.pass_context
def abandon(ctx: click.Context, session_id: str):
    """Close a session without an executable environment."""
    engine = _engine(ctx, need_backend=False)
    try:
        state = engine.abandon(session_id)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    click.echo(f"phase: {phase_label(state)}")


# ---------------------------------------------------------------------------
# Reports and replay


@main.command()
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="metrics.csv", show_default=True)
@click.option("--fig/--no-fig", "figure", default=True, help="Also render a PNG next to the CSV.")
@click.pass_context
def report(ctx: click.Context, out_path: str, figure: bool):
    """Write the metrics table for all finished sessions (CSV plus figure)."""
    engine = _engine(ctx, need_backend=False)
    rows = []
    try:
        for summary in engine.list_sessions():
            state = engine.get(summary.session_id)
            if state.phase in (Phase.EXECUTABLE, Phase.ABANDONED):
                rows.append((state.session_id, metrics_for(state)))
        written = write_report(rows, out_path, figure=figure)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    click.echo(f"wrote {len(rows)} row(s): " + ", ".join(str(p) for p in written))


@main.command()
@click.option(
    "--transcript",
    "scenario_dirs",
    multiple=True,
    required=True,
    type=click.Path(exists=True, file_okay=False),
    help="Scenario directory (description, transcript, script); repeatable.",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="metrics.csv", show_default=True)
@click.option("--fig", "figure", is_flag=True, help="Also render a PNG next to the CSV.")
@click.option(
    "--workdir",
    "workdir",
    type=click.Path(file_okay=False),
    default=None,
    help="Keep the replayed session files here (default: a throwaway directory).",
)
@click.pass_context
def replay(ctx: click.Context, scenario_dirs: tuple[str, ...], out_path: str, figure: bool, workdir: str | None):
    """Re-run recorded sessions offline and write their metrics table."""
    config = _config(ctx)
    rows = []

    def run_all(root: Path) -> None:
        for scenario_dir in scenario_dirs:
            result = replay_scenario(
                scenario_dir,
                root,
                templates_dir=config.templates_dir,
                max_auto_debug=config.auto_debug_limit,
            )
            rows.append((result.scenario.name, result.metrics))

    try:
        if workdir is not None:
            run_all(Path(workdir))
        else:
            with tempfile.TemporaryDirectory(prefix="delf-replay-") as tmp:
                run_all(Path(tmp))
        written = write_report(rows, out_path, figure=figure)
    except _DOMAIN_ERRORS as exc:
        raise _fail(str(exc)) from exc
    for name, metrics in rows:
        kind = metrics.space_kind.value if metrics.space_kind else "unknown"
        trials = "unresolved" if metrics.trials_to_execution is None else metrics.trials_to_execution
        click.echo(f"{name},{kind},{metrics.description_tokens},{trials}")
    click.echo("wrote " + ", ".join(str(p) for p in written))


# ---------------------------------------------------------------------------
# Analyzer commands


def _verdict_word(sufficient: bool) -> str:
    return "sufficient" if sufficient else "insufficient"


@main.command()
@click.option("--mdp", "mdp_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--drop", "drops", multiple=True, help="Drop an observation attribute; repeatable.")
@click.option("--keep", "keeps", multiple=True, help="Keep only these attributes; repeatable.")
@click.option("--actions", "action_subset", multiple=True, help="Check this action subset; repeatable.")
@click.option("--delta", type=float, default=DEFAULT_DELTA, show_default=True, help="Relative slack.")
@click.option("--budget", type=int, default=DEFAULT_BUDGET, show_default=True, help="Policy enumeration cap.")
@click.option("--necessity", is_flag=True, help="Also check per-attribute necessity of the projection.")
@click.option("--action-necessity", "action_necessity", is_flag=True, help="Also check per-action necessity.")
@click.pass_context
def analyze(
    ctx: click.Context,
    mdp_path: str,
    drops: tuple[str, ...],
    keeps: tuple[str, ...],
    action_subset: tuple[str, ...],
    delta: float,
    budget: int,
    necessity: bool,
    action_necessity: bool,
):
    """Check sufficiency and necessity of a design against an MDP fixture."""
    if drops and keeps:
        raise click.UsageError("--drop and --keep are mutually exclusive")
    try:
        fixture = load_mdp_fixture(mdp_path)
        mdp = fixture.mdp
        projection = fixture.features
        if keeps:
            projection = projection.keep(list(keeps))
        for name in drops:
            projection = projection.drop(name)
        click.echo(
            f"fixture: {fixture.name or Path(mdp_path).stem} "
            f"({mdp.n_states} states, {mdp.n_actions} actions, "
            f"gamma={mdp.discount:g}, horizon={mdp.horizon})"
        )
        click.echo(f"optimal return: {optimal_return(mdp):.12g}")

        attrs = ", ".join(projection.attribute_names)
        verdict = is_sufficient(mdp, projection, delta=delta, budget=budget)
        click.echo(
            f"observation [{attrs}]: {_verdict_word(verdict.sufficient)} "
            f"(best reactive return {verdict.best_reactive_return:.12g} "
            f"vs optimal {verdict.optimal_return:.12g}, delta={delta:g}, via {verdict.method})"
        )
        if necessity:
            report = is_necessary_observation(mdp, projection, delta=delta, budget=budget)
            click.echo(f"observation necessity: {'necessary' if report.necessary else 'not necessary'}")
            for name, removal in report.removals:
                click.echo(
                    f"  without {name}: {_verdict_word(removal.sufficient)} "
                    f"(best reactive return {removal.best_reactive_return:.12g})"
                )
        if action_subset:
            averdict = is_sufficient_action(mdp, list(action_subset), delta=delta)
            click.echo(
                f"actions [{', '.join(action_subset)}]: {_verdict_word(averdict.sufficient)} "
                f"(restricted return {averdict.restricted_return:.12g} "
                f"vs optimal {averdict.optimal_return:.12g})"
            )
        if action_necessity:
            subset = list(action_subset) if action_subset else list(mdp.actions)
            areport = is_necessary_action(mdp, subset, delta=delta)
            click.echo(f"action necessity: {'necessary' if areport.necessary else 'not necessary'}")
            for label, removal in areport.removals:
                click.echo(
                    f"  without {label}: {_verdict_word(removal.sufficient)} "
                    f"(restricted return {removal.restricted_return:.12g})"
                )
    except (KeyError, *_DOMAIN_ERRORS) as exc:
        raise _fail(str(exc)) from exc


@main.command("keylock-gen")
@click.option("--size", type=int, default=3, show_default=True)
@click.option("--key", required=True, help="Key cell as X,Y.")
@click.option("--lock", required=True, help="Lock cell as X,Y.")
@click.option("--start", required=True, help="Start cell as X,Y.")
@click.option("--wall", "walls", multiple=True, help="Wall cell as X,Y; repeatable.")
@click.option("--gamma", type=float, default=0.95, show_default=True)
@click.option("--horizon", type=int, default=20, show_default=True)
@click.option("--name", default="keylock", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def keylock_gen(
    size: int,
    key: str,
    lock: str,
    start: str,
    walls: tuple[str, ...],
    gamma: float,
    horizon: int,
    name: str,
    out_path: str,
):
    """Generate a key-lock gridworld MDP fixture file."""

    def cell(text: str) -> tuple[int, int]:
        try:
            x, y = (int(part) for part in text.split(","))
        except ValueError:
            raise click.UsageError(f"cell must be X,Y with integers, got {text!r}") from None
        return (x, y)

    try:
        fixture = generate_keylock(
            size=size,
            key=cell(key),
            lock=cell(lock),
            start=cell(start),
            walls=tuple(cell(w) for w in walls),
            gamma=gamma,
            horizon=horizon,
            name=name,
        )
        save_mdp_fixture(fixture, out_path)
    except (ValueError, OSError) as exc:
        raise _fail(str(exc)) from exc
    click.echo(f"wrote {out_path} ({fixture.mdp.n_states} states, optimal return {optimal_return(fixture.mdp):.12g})")


# ---------------------------------------------------------------------------
# HTTP server


@main.command()
@click.option("--bind", default="127.0.0.1:8000", show_default=True, help="HOST:PORT to listen on.")
@click.option(
    "--ui",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Directory of built browser-UI assets to serve under /.",
)
@click.pass_context
def serve(ctx: click.Context, bind: str, ui: Path | None):
    """Serve the HTTP API (and anything that polls it) on localhost by default."""
    import uvicorn

    from .http_api import create_app

    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--bind must be HOST:PORT, got {bind!r}")
    engine = _engine(ctx)
    uvicorn.run(
        create_app(engine, static_dir=ui), host=host, port=int(port_text), log_level="warning"
    )


if __name__ == "__main__":
    main()
