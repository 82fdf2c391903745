"""Non-interactive session replay from a bundled scenario directory.

A scenario directory holds everything needed to rerun a recorded workflow
without network access or candidate execution:

    description.txt      the task description the session starts from
    transcript.jsonl     recorded model exchanges, replayed strictly in order
    scenario.json        the step script, the scripted validation verdicts,
                         and the expected outcome

Validation is stubbed: a ScriptedExecutor serves the verdict sequence from
scenario.json instead of running candidate code. The mapping from verdict
spec to report is deterministic, so debug prompts rendered during replay are
byte-identical to the ones rendered when the transcript was recorded, which
is what lets the replay backend match request hashes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..design_schema import DesignChoice, from_document
from ..ice_session import (
    DEFAULT_MAX_AUTO_DEBUG,
    Phase,
    SessionEngine,
    SessionMetrics,
    SessionState,
    SessionStore,
    metrics_for,
    phase_label,
)
from ..llm_gateway import ReplayBackend
from ..prompt_engine import PromptEngine, load_templates
from ..sandbox_executor import (
    ExecutionConfig,
    FailureClass,
    Finding,
    HarnessError,
    ValidationReport,
)

SCENARIO_SCHEMA_VERSION = 1
SCENARIO_FILE = "scenario.json"

# Bundled scenarios, in the order the metrics table reports them.
BUNDLED_SCENARIOS = ("recommender", "selfdriving", "swimmer", "keylock")

_STEP_OPS = ("propose", "feedback", "approve", "codify", "validate")


class ScenarioError(RuntimeError):
    """The scenario files are malformed or the replay diverged from them."""


def bundled_scenario_dir(name: str) -> Path:
    """Filesystem path of a replay scenario shipped with the package."""
    root = resources.files("delf_studio").joinpath("fixtures/scenarios")
    path = Path(str(root)) / name
    if not (path / SCENARIO_FILE).is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return path


@dataclass(frozen=True)
class ScenarioStep:
    op: str
    text: str | None = None  # feedback only
    edited: Mapping[str, Any] | None = None  # approve only: design documents


@dataclass(frozen=True)
class Scenario:
    name: str
    path: Path
    model: str
    description: str
    steps: tuple[ScenarioStep, ...]
    verdicts: tuple[Mapping[str, Any], ...]
    transcript_path: Path
    expected: Mapping[str, Any] | None


@dataclass(frozen=True)
class ReplayResult:
    scenario: Scenario
    state: SessionState
    metrics: SessionMetrics


def _step_from_dict(index: int, data: Mapping[str, Any]) -> ScenarioStep:
    op = data.get("op")
    if op not in _STEP_OPS:
        raise ScenarioError(f"step {index}: unknown op {op!r}; expected one of {_STEP_OPS}")
    text = data.get("text")
    if op == "feedback":
        if not isinstance(text, str) or not text.strip():
            raise ScenarioError(f"step {index}: feedback needs nonempty 'text'")
    elif text is not None:
        raise ScenarioError(f"step {index}: 'text' only belongs on feedback steps")
    edited = data.get("edited")
    if edited is not None and op != "approve":
        raise ScenarioError(f"step {index}: 'edited' only belongs on approve steps")
    return ScenarioStep(op=op, text=text, edited=edited)


def load_scenario(path: str | Path) -> Scenario:
    """Read and sanity-check a scenario directory."""
    directory = Path(path)
    scenario_path = directory / SCENARIO_FILE
    try:
        data = json.loads(scenario_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read {scenario_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{scenario_path} is not valid JSON: {exc}") from exc
    if data.get("schema_version") != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(
            f"{scenario_path}: unsupported schema_version {data.get('schema_version')!r}"
        )
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError(f"{scenario_path}: 'name' must be a nonempty string")
    description_file = directory / str(data.get("description_file", "description.txt"))
    try:
        description = description_file.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {description_file}: {exc}") from exc
    transcript_path = directory / str(data.get("transcript_file", "transcript.jsonl"))
    if not transcript_path.exists():
        raise ScenarioError(f"missing transcript: {transcript_path}")
    steps_field = data.get("steps")
    if not isinstance(steps_field, list) or not steps_field:
        raise ScenarioError(f"{scenario_path}: 'steps' must be a nonempty list")
    steps = tuple(_step_from_dict(i, s) for i, s in enumerate(steps_field))
    verdicts_field = data.get("validation_script", [])
    if not isinstance(verdicts_field, list):
        raise ScenarioError(f"{scenario_path}: 'validation_script' must be a list")
    for i, spec in enumerate(verdicts_field):
        report_from_verdict(spec)  # raises ScenarioError on bad specs
    expected = data.get("expected")
    if expected is not None and not isinstance(expected, Mapping):
        raise ScenarioError(f"{scenario_path}: 'expected' must be an object")
    return Scenario(
        name=name,
        path=directory,
        model=str(data.get("model", "default")),
        description=description,
        steps=steps,
        verdicts=tuple(verdicts_field),
        transcript_path=transcript_path,
        expected=expected,
    )


def report_from_verdict(spec: Mapping[str, Any]) -> ValidationReport:
    """Deterministic verdict spec -> report. No clocks, no randomness: the
    report text feeds debug prompts, which must hash identically on every run."""
    if not isinstance(spec, Mapping):
        raise ScenarioError(f"verdict spec must be an object, got {type(spec).__name__}")
    verdict = spec.get("verdict")
    if "findings" in spec:
        # Full captured report, e.g. recorded from a real harness run. Only the
        # wall-clock field is scrubbed; everything else must round-trip intact.
        try:
            report = ValidationReport.from_dict({**spec, "duration_seconds": 0.0})
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad captured report in validation script: {exc}") from exc
        if report.verdict not in ("pass", "fail"):
            raise ScenarioError(f"verdict must be 'pass' or 'fail', got {report.verdict!r}")
        return report
    if verdict == "pass":
        return ValidationReport(
            verdict="pass",
            failure_class=None,
            stage="done",
            findings=(),
            error_type=None,
            error_message=None,
            stderr_tail="",
            duration_seconds=0.0,
        )
    if verdict != "fail":
        raise ScenarioError(f"verdict must be 'pass' or 'fail', got {verdict!r}")
    try:
        failure_class = FailureClass(spec["failure_class"])
    except KeyError:
        raise ScenarioError("fail verdict needs a 'failure_class'") from None
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    findings: tuple[Finding, ...] = ()
    check = spec.get("check")
    if check is not None:
        findings = (Finding(str(check), False, str(spec.get("detail", ""))),)
    return ValidationReport(
        verdict="fail",
        failure_class=failure_class,
        stage=spec.get("stage"),
        findings=findings,
        error_type=spec.get("error_type"),
        error_message=spec.get("error_message"),
        stderr_tail=str(spec.get("stderr", "")),
        duration_seconds=0.0,
    )


class ScriptedExecutor:
    """Serves a fixed verdict sequence in place of running candidate code."""

    def __init__(self, verdicts: Sequence[Mapping[str, Any]]):
        self._queue = [report_from_verdict(v) for v in verdicts]
        self.calls = 0

    @property
    def remaining(self) -> int:
        return len(self._queue) - self.calls

    def __call__(
        self, source: str, design_document: str, config: ExecutionConfig
    ) -> ValidationReport:
        if self.calls >= len(self._queue):
            raise HarnessError(f"validation script exhausted after {self.calls} runs")
        report = self._queue[self.calls]
        self.calls += 1
        return report


def _parse_edited(edited: Mapping[str, Any]) -> tuple[DesignChoice, DesignChoice]:
    for key in ("observation", "action"):
        if key not in edited:
            raise ScenarioError(f"edited design needs an '{key}' document")
    return from_document(edited["observation"]), from_document(edited["action"])


def replay_scenario(
    path: str | Path,
    store_root: str | Path,
    *,
    templates_dir: str | Path | None = None,
    max_auto_debug: int = DEFAULT_MAX_AUTO_DEBUG,
) -> ReplayResult:
    """Run one scenario to completion against a replay backend and a scripted
    executor. Raises ScenarioError if the run strays from the script: leftover
    transcript entries or verdicts, a non-executable end state, or a mismatch
    with the scenario's expected outcome."""
    scenario = load_scenario(path)
    backend = ReplayBackend(scenario.transcript_path, scenario.model)
    executor = ScriptedExecutor(scenario.verdicts)
    engine = SessionEngine(
        store=SessionStore(Path(store_root)),
        backend=backend,
        prompts=PromptEngine(load_templates(templates_dir)),
        execution=ExecutionConfig(harness_command=("scripted",)),
        max_auto_debug=max_auto_debug,
        executor=executor,
    )
    try:
        state = engine.create_session(scenario.description)
        sid = state.session_id
        for index, step in enumerate(scenario.steps):
            if step.op == "propose":
                state = engine.propose_design(sid)
            elif step.op == "feedback":
                assert step.text is not None
                state = engine.submit_feedback(sid, step.text)
            elif step.op == "approve":
                edited = _parse_edited(step.edited) if step.edited is not None else None
                state = engine.approve_design(sid, edited)
            elif step.op == "codify":
                state = engine.codify(sid)
            elif step.op == "validate":
                state = engine.validate(sid)
            rejected = [e for e in state.events if e.kind in ("reply-rejected", "codify-rejected")]
            if rejected:
                raise ScenarioError(
                    f"{scenario.name}: step {index} ({step.op}) had a rejected reply: "
                    f"{rejected[-1].detail}"
                )
    finally:
        backend.close()
    if state.phase is not Phase.EXECUTABLE:
        raise ScenarioError(
            f"{scenario.name}: replay ended in {phase_label(state)}, expected Executable"
        )
    if backend.remaining:
        raise ScenarioError(
            f"{scenario.name}: {backend.remaining} transcript entr(y/ies) never consumed"
        )
    if executor.remaining:
        raise ScenarioError(f"{scenario.name}: {executor.remaining} scripted verdict(s) never used")
    metrics = metrics_for(state)
    _check_expected(scenario, metrics)
    return ReplayResult(scenario=scenario, state=state, metrics=metrics)


def _check_expected(scenario: Scenario, metrics: SessionMetrics) -> None:
    expected = scenario.expected
    if not expected:
        return
    actual = {
        "space_kind": metrics.space_kind.value if metrics.space_kind else None,
        "description_tokens": metrics.description_tokens,
        "trials_to_execution": metrics.trials_to_execution,
    }
    for key, want in expected.items():
        if key not in actual:
            raise ScenarioError(f"{scenario.name}: unknown expected key {key!r}")
        if actual[key] != want:
            raise ScenarioError(
                f"{scenario.name}: expected {key}={want!r}, replay produced {actual[key]!r}"
            )
