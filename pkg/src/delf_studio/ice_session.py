"""Session orchestration: a persisted state machine for interactive
environment synthesis.

A session walks description -> proposed design -> approved design -> generated
code -> validated code, with two feedback loops: design revision before
approval and debugging after a failed validation. Every model query lands in
an audit transcript; the trial counter prices the loops (the first design
query and the first codify query are free, every later model query costs 1,
direct user edits cost 0).

Persistence is one JSON file per session, written atomically
(write-temp-then-rename), plus an index file for listings. One writer per
session is enforced with a file lock; readers take immutable snapshots without
locking.
"""

from __future__ import annotations

import csv
import json
import os
import time
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import filelock

from .chat import ChatMessage, Conversation, Role, conversation
from .design_schema import (
    DesignChoice,
    SpaceKind,
    classify_spaces,
    from_document,
    require_valid,
    space_decl_to_dict,
    to_document,
    to_space_decl,
)
from .llm_gateway import ChatBackend
from .prompt_engine import PromptEngine, RenderedPrompt, count_description_tokens
from .response_parser import (
    CodeCandidate,
    DesignReplyError,
    classify,
    parse_design_reply,
    pick_code_candidate,
)
from .sandbox_executor import (
    ExecutionConfig,
    HarnessError,
    ValidationReport,
    execute_candidate,
)

SESSION_SCHEMA_VERSION = 1
DESIGN_DOCUMENT_SCHEMA_VERSION = 1
INDEX_SCHEMA_VERSION = 1

PROVENANCE_MODEL = "model"
PROVENANCE_USER = "user-revised"

ORIGIN_CODIFY = "codify"
ORIGIN_DEBUG = "debug"

METRICS_CSV_COLUMNS = ("environment", "space_kind", "description_tokens", "trials_to_execution")

DEFAULT_MAX_AUTO_DEBUG = 10


class Phase(str, Enum):
    DRAFTING = "Drafting"
    DESIGN_PROPOSED = "DesignProposed"
    DESIGN_APPROVED = "DesignApproved"
    CODE_GENERATED = "CodeGenerated"
    VALIDATING = "Validating"
    FAILED = "Failed"
    EXECUTABLE = "Executable"
    ABANDONED = "Abandoned"


TERMINAL_PHASES = (Phase.EXECUTABLE, Phase.ABANDONED)


class SessionError(RuntimeError):
    pass


class SessionNotFound(SessionError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"no session {session_id!r}")


class SessionPhaseError(SessionError):
    """The operation is not allowed in the session's current phase."""

    def __init__(self, operation: str, phase: str, reason: str = ""):
        self.operation = operation
        self.phase = phase
        message = f"{operation} is not allowed in phase {phase}"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class StorageCorruption(SessionError):
    pass


# --------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class DesignRecord:
    """One observation/action pair in the design history."""

    observation: DesignChoice
    action: DesignChoice
    provenance: str  # model | user-revised
    at: float


@dataclass(frozen=True)
class CodeRecord:
    candidate: CodeCandidate
    origin: str  # codify | debug
    at: float


@dataclass(frozen=True)
class SessionEvent:
    """One append-only log entry; cursors are 1-based and never reused."""

    cursor: int
    kind: str
    detail: str
    at: float


@dataclass(frozen=True)
class SessionState:
    session_id: str
    description: str
    phase: Phase
    failure_count: int
    design_history: tuple[DesignRecord, ...]
    code_versions: tuple[CodeRecord, ...]
    reports: tuple[ValidationReport, ...]
    # None until the first model query; records system once, then
    # user/assistant turns. Ends with a user turn iff pending_feedback is set.
    transcript: Conversation | None
    trial_counter: int
    design_query_count: int
    codify_query_count: int
    # Feedback already on the transcript, awaiting the next query's reply.
    pending_feedback: str | None
    # Feedback to embed in the next revision or debug prompt; survives
    # rejected replies so a retry re-renders the same hint.
    revision_feedback: str | None
    events: tuple[SessionEvent, ...]
    created_at: float
    updated_at: float


@dataclass(frozen=True)
class SessionMetrics:
    description_tokens: int
    trials_to_execution: int | None  # None = unresolved (session not executable)
    space_kind: SpaceKind | None  # None when no design was ever accepted
    outcome: str  # Executable | Abandoned


@dataclass(frozen=True)
class SessionSummary:
    """Index entry for listings; everything else lives in the session file."""

    session_id: str
    phase: str
    description_tokens: int
    created_at: float
    updated_at: float


def phase_label(state: SessionState) -> str:
    """Display form; failure phases carry their count, e.g. Failed(2)."""
    if state.phase is Phase.FAILED:
        return f"Failed({state.failure_count})"
    return state.phase.value


def current_design(state: SessionState) -> tuple[DesignChoice, DesignChoice]:
    if not state.design_history:
        raise SessionError(f"session {state.session_id} has no design yet")
    latest = state.design_history[-1]
    return latest.observation, latest.action


def events_since(state: SessionState, cursor: int) -> tuple[SessionEvent, ...]:
    """Events strictly after the cursor; re-polling an old cursor replays the
    same suffix in the same order."""
    return tuple(e for e in state.events if e.cursor > cursor)


def expected_design_document(observation: DesignChoice, action: DesignChoice) -> str:
    """The design.json the execution harness checks candidates against."""
    doc = {
        "schema_version": DESIGN_DOCUMENT_SCHEMA_VERSION,
        "observation": space_decl_to_dict(to_space_decl(observation)),
        "action": space_decl_to_dict(to_space_decl(action)),
    }
    return json.dumps(doc, indent=2) + "\n"


def metrics_for(state: SessionState) -> SessionMetrics:
    """Evaluation measures of a finished session; pure and idempotent."""
    if state.phase not in TERMINAL_PHASES:
        raise SessionPhaseError("finalize_metrics", phase_label(state))
    if state.design_history:
        observation, action = current_design(state)
        space = classify_spaces(observation, action)
    else:
        space = None
    trials = state.trial_counter if state.phase is Phase.EXECUTABLE else None
    return SessionMetrics(
        description_tokens=count_description_tokens(state.description),
        trials_to_execution=trials,
        space_kind=space,
        outcome=state.phase.value,
    )


def write_metrics_csv(
    rows: Iterable[tuple[str, SessionMetrics]], path: str | Path
) -> None:
    """One row per session: environment, space_kind, description_tokens,
    trials_to_execution. Unresolved trials print as 'unresolved'."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_CSV_COLUMNS)
        for name, metrics in rows:
            writer.writerow(
                [
                    name,
                    metrics.space_kind.value if metrics.space_kind else "unknown",
                    metrics.description_tokens,
                    "unresolved" if metrics.trials_to_execution is None else metrics.trials_to_execution,
                ]
            )


# --------------------------------------------------------------------------
# Serialization


def session_to_dict(state: SessionState) -> dict[str, Any]:
    return {
        "schema_version": SESSION_SCHEMA_VERSION,
        "session_id": state.session_id,
        "description": state.description,
        "phase": state.phase.value,
        "failure_count": state.failure_count,
        "design_history": [
            {
                "observation": to_document(r.observation),
                "action": to_document(r.action),
                "provenance": r.provenance,
                "at": r.at,
            }
            for r in state.design_history
        ],
        "code_versions": [
            {
                "language_tag": r.candidate.language_tag,
                "source": r.candidate.source,
                "block_index": r.candidate.block_index,
                "origin": r.origin,
                "at": r.at,
            }
            for r in state.code_versions
        ],
        "reports": [r.to_dict() for r in state.reports],
        "transcript": None
        if state.transcript is None
        else [{"role": m.role.value, "content": m.content} for m in state.transcript.messages],
        "trial_counter": state.trial_counter,
        "design_query_count": state.design_query_count,
        "codify_query_count": state.codify_query_count,
        "pending_feedback": state.pending_feedback,
        "revision_feedback": state.revision_feedback,
        "events": [
            {"cursor": e.cursor, "kind": e.kind, "detail": e.detail, "at": e.at}
            for e in state.events
        ],
        "created_at": state.created_at,
        "updated_at": state.updated_at,
    }


def session_from_dict(data: Mapping[str, Any]) -> SessionState:
    version = data.get("schema_version")
    if version != SESSION_SCHEMA_VERSION:
        raise StorageCorruption(f"unsupported session schema_version {version!r}")
    raw_transcript = data.get("transcript")
    transcript = (
        None
        if raw_transcript is None
        else conversation(*[(m["role"], m["content"]) for m in raw_transcript])
    )
    return SessionState(
        session_id=data["session_id"],
        description=data["description"],
        phase=Phase(data["phase"]),
        failure_count=int(data["failure_count"]),
        design_history=tuple(
            DesignRecord(
                observation=from_document(r["observation"]),
                action=from_document(r["action"]),
                provenance=r["provenance"],
                at=float(r["at"]),
            )
            for r in data["design_history"]
        ),
        code_versions=tuple(
            CodeRecord(
                candidate=CodeCandidate(r["language_tag"], r["source"], int(r["block_index"])),
                origin=r["origin"],
                at=float(r["at"]),
            )
            for r in data["code_versions"]
        ),
        reports=tuple(ValidationReport.from_dict(r) for r in data["reports"]),
        transcript=transcript,
        trial_counter=int(data["trial_counter"]),
        design_query_count=int(data["design_query_count"]),
        codify_query_count=int(data["codify_query_count"]),
        pending_feedback=data.get("pending_feedback"),
        revision_feedback=data.get("revision_feedback"),
        events=tuple(
            SessionEvent(int(e["cursor"]), e["kind"], e["detail"], float(e["at"]))
            for e in data["events"]
        ),
        created_at=float(data["created_at"]),
        updated_at=float(data["updated_at"]),
    )


# --------------------------------------------------------------------------
# Store


class SessionStore:
    """Directory of <session_id>.json snapshots plus index.json.

    Snapshots and the index are replaced atomically, so lock-free readers see
    a complete old or new file, never a torn one. Writers serialize per
    session via writer_lock(); the index has its own lock.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def session_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def writer_lock(self, session_id: str) -> filelock.FileLock:
        return filelock.FileLock(str(self.root / f"{session_id}.lock"))

    @property
    def index_path(self) -> Path:
        return self.root / "index.json"

    def exists(self, session_id: str) -> bool:
        return self.session_path(session_id).exists()

    def save(self, state: SessionState) -> None:
        path = self.session_path(state.session_id)
        _atomic_write_json(path, session_to_dict(state))
        self._update_index(state)

    def load(self, session_id: str) -> SessionState:
        path = self.session_path(session_id)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise SessionNotFound(session_id) from None
        try:
            return session_from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if isinstance(exc, StorageCorruption):
                raise
            raise StorageCorruption(f"{path}: {exc}") from exc

    def list_sessions(self) -> list[SessionSummary]:
        """Index-backed listing, oldest first; rebuilt from the session files
        when the index is missing."""
        try:
            data = json.loads(self.index_path.read_text(encoding="utf-8"))
            entries = data["sessions"]
        except (FileNotFoundError, json.JSONDecodeError, KeyError):
            entries = self.rebuild_index()["sessions"]
        summaries = [
            SessionSummary(
                session_id=sid,
                phase=e["phase"],
                description_tokens=int(e["description_tokens"]),
                created_at=float(e["created_at"]),
                updated_at=float(e["updated_at"]),
            )
            for sid, e in entries.items()
        ]
        summaries.sort(key=lambda s: (s.created_at, s.session_id))
        return summaries

    def rebuild_index(self) -> dict[str, Any]:
        with filelock.FileLock(str(self.root / "index.lock")):
            sessions: dict[str, Any] = {}
            for path in sorted(self.root.glob("*.json")):
                if path.name == "index.json":
                    continue
                state = self.load(path.stem)
                sessions[state.session_id] = _summary_entry(state)
            data = {"schema_version": INDEX_SCHEMA_VERSION, "sessions": sessions}
            _atomic_write_json(self.index_path, data)
            return data

    def _update_index(self, state: SessionState) -> None:
        with filelock.FileLock(str(self.root / "index.lock")):
            try:
                data = json.loads(self.index_path.read_text(encoding="utf-8"))
                if data.get("schema_version") != INDEX_SCHEMA_VERSION:
                    raise ValueError
            except (FileNotFoundError, json.JSONDecodeError, ValueError, KeyError):
                data = {"schema_version": INDEX_SCHEMA_VERSION, "sessions": {}}
            data["sessions"][state.session_id] = _summary_entry(state)
            _atomic_write_json(self.index_path, data)


def _summary_entry(state: SessionState) -> dict[str, Any]:
    return {
        "phase": phase_label(state),
        "description_tokens": count_description_tokens(state.description),
        "created_at": state.created_at,
        "updated_at": state.updated_at,
    }


def _atomic_write_json(path: Path, data: dict[str, Any]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# Packaged prompt assets


def default_api_skeleton() -> str:
    """The code structure embedded in codify queries."""
    return (
        resources.files("delf_studio").joinpath("data/api_skeleton.txt").read_text("utf-8")
    )


def default_coding_rules() -> tuple[str, ...]:
    text = resources.files("delf_studio").joinpath("data/coding_rules.txt").read_text("utf-8")
    rules = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rules.append(line)
    return tuple(rules)


# --------------------------------------------------------------------------
# Engine


class SessionEngine:
    """Runs sessions against a chat backend and an execution harness.

    All mutating operations load the session under its writer lock, apply the
    change, persist atomically, and return the new immutable snapshot.
    """

    def __init__(
        self,
        store: SessionStore,
        backend: ChatBackend,
        prompts: PromptEngine,
        execution: ExecutionConfig,
        api_template: str | None = None,
        coding_rules: Sequence[str] | None = None,
        auto_debug: bool = True,
        max_auto_debug: int = DEFAULT_MAX_AUTO_DEBUG,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] | None = None,
        executor: Callable[[str, str, ExecutionConfig], ValidationReport] | None = None,
    ):
        self.store = store
        self.backend = backend
        self.prompts = prompts
        self.execution = execution
        # Seam for replay and property tests: swap the child-process harness
        # for a scripted verdict source without touching the state machine.
        self.executor = executor if executor is not None else execute_candidate
        self.api_template = api_template if api_template is not None else default_api_skeleton()
        self.coding_rules = tuple(coding_rules) if coding_rules is not None else default_coding_rules()
        self.auto_debug = auto_debug
        self.max_auto_debug = max_auto_debug
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex)

    # -- reads ------------------------------------------------------------

    def get(self, session_id: str) -> SessionState:
        return self.store.load(session_id)

    def list_sessions(self) -> list[SessionSummary]:
        return self.store.list_sessions()

    # -- lifecycle ---------------------------------------------------------

    def create_session(self, description: str) -> SessionState:
        if not description.strip():
            raise ValueError("task description must not be empty")
        session_id = self.id_factory()
        if self.store.exists(session_id):
            raise SessionError(f"session {session_id!r} already exists")
        now = self.clock()
        state = SessionState(
            session_id=session_id,
            description=description,
            phase=Phase.DRAFTING,
            failure_count=0,
            design_history=(),
            code_versions=(),
            reports=(),
            transcript=None,
            trial_counter=0,
            design_query_count=0,
            codify_query_count=0,
            pending_feedback=None,
            revision_feedback=None,
            events=(),
            created_at=now,
            updated_at=now,
        )
        state = self._with_event(state, "created", f"{count_description_tokens(description)} words")
        self.store.save(state)
        return state

    def propose_design(self, session_id: str) -> SessionState:
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            if state.phase is Phase.DRAFTING:
                prompt = self.prompts.render_design_query(state.description)
            elif state.phase is Phase.DESIGN_PROPOSED:
                if not state.revision_feedback:
                    raise SessionPhaseError(
                        "propose_design", phase_label(state), "re-proposal needs feedback first"
                    )
                observation, action = current_design(state)
                prompt = self.prompts.render_revision_query(
                    observation, action, state.revision_feedback
                )
            else:
                raise SessionPhaseError("propose_design", phase_label(state))
            state, content = self._issue_query(state, prompt, stage="design")
            try:
                observation, action = parse_design_reply(content)
            except DesignReplyError:
                kind = classify(content)
                state = self._with_event(state, "reply-rejected", kind.value)
            else:
                record = DesignRecord(observation, action, PROVENANCE_MODEL, self.clock())
                state = replace(
                    state,
                    phase=Phase.DESIGN_PROPOSED,
                    design_history=state.design_history + (record,),
                    revision_feedback=None,
                )
                state = self._with_event(
                    state,
                    "design-proposed",
                    f"{len(observation.attributes)} observation, {len(action.attributes)} action attributes",
                )
            state = self._touch(state)
            self.store.save(state)
            return state

    def submit_feedback(self, session_id: str, feedback: str) -> SessionState:
        if not feedback.strip():
            raise ValueError("feedback must not be empty")
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            if state.phase not in (Phase.DESIGN_PROPOSED, Phase.FAILED):
                raise SessionPhaseError("submit_feedback", phase_label(state))
            if state.pending_feedback is not None:
                # Consecutive feedback merges into one pending user turn.
                merged = state.pending_feedback + "\n\n" + feedback
                assert state.transcript is not None
                messages = state.transcript.messages[:-1] + (ChatMessage(Role.USER, merged),)
                state = replace(
                    state,
                    transcript=Conversation(messages),
                    pending_feedback=merged,
                    revision_feedback=merged,
                )
            else:
                turn = ChatMessage(Role.USER, feedback)
                transcript = (
                    state.transcript.append(turn)
                    if state.transcript is not None
                    else Conversation((turn,))
                )
                state = replace(
                    state,
                    transcript=transcript,
                    pending_feedback=feedback,
                    revision_feedback=feedback,
                )
            state = self._touch(self._with_event(state, "feedback-submitted", ""))
            self.store.save(state)
            return state

    def approve_design(
        self,
        session_id: str,
        edited: tuple[DesignChoice, DesignChoice] | None = None,
    ) -> SessionState:
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            if state.phase is not Phase.DESIGN_PROPOSED:
                raise SessionPhaseError("approve_design", phase_label(state))
            detail = "as proposed"
            if edited is not None:
                observation, action = edited
                require_valid(observation)  # raises before any state change
                require_valid(action)
                record = DesignRecord(observation, action, PROVENANCE_USER, self.clock())
                state = replace(state, design_history=state.design_history + (record,))
                detail = "with user edits"
            # Stale design feedback does not carry into the codify loop.
            state = replace(state, phase=Phase.DESIGN_APPROVED, revision_feedback=None)
            state = self._touch(self._with_event(state, "design-approved", detail))
            self.store.save(state)
            return state

    def codify(self, session_id: str) -> SessionState:
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            state = self._codify_step(state)
            self.store.save(state)
            return state

    def validate(self, session_id: str) -> SessionState:
        """Validate the latest candidate; on failure, auto-issue debug queries
        (each one a trial) until the candidate passes or the per-call budget
        runs out."""
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            if state.phase is not Phase.CODE_GENERATED:
                raise SessionPhaseError("validate", phase_label(state))
            state = self._validate_once(state)
            debug_used = 0
            while (
                self.auto_debug
                and state.phase is Phase.FAILED
                and debug_used < self.max_auto_debug
            ):
                state = self._codify_step(state)
                self.store.save(state)
                debug_used += 1
                if state.phase is Phase.CODE_GENERATED:
                    state = self._validate_once(state)
            if self.auto_debug and state.phase is Phase.FAILED and debug_used >= self.max_auto_debug:
                state = self._touch(
                    self._with_event(
                        state, "auto-debug-exhausted", f"{debug_used} debug queries spent"
                    )
                )
                self.store.save(state)
            return state

    def abandon(self, session_id: str) -> SessionState:
        with self.store.writer_lock(session_id):
            state = self.store.load(session_id)
            if state.phase in TERMINAL_PHASES:
                raise SessionPhaseError("abandon", phase_label(state))
            state = replace(state, phase=Phase.ABANDONED)
            state = self._touch(self._with_event(state, "abandoned", ""))
            self.store.save(state)
            return state

    def finalize_metrics(self, session_id: str) -> SessionMetrics:
        return metrics_for(self.store.load(session_id))

    # -- internals ---------------------------------------------------------

    def _with_event(self, state: SessionState, kind: str, detail: str) -> SessionState:
        event = SessionEvent(len(state.events) + 1, kind, detail, self.clock())
        return replace(state, events=state.events + (event,))

    def _touch(self, state: SessionState) -> SessionState:
        return replace(state, updated_at=self.clock())

    def _issue_query(
        self, state: SessionState, prompt: RenderedPrompt, stage: str
    ) -> tuple[SessionState, str]:
        """Send one self-contained [system, user] query; account for it in the
        trial counter and the audit transcript. Gateway errors propagate
        before any state change."""
        query = conversation(("system", prompt.system), ("user", prompt.user))
        reply = self.backend.complete(query)
        if stage == "design":
            extra = 1 if state.design_query_count >= 1 else 0
            state = replace(
                state,
                design_query_count=state.design_query_count + 1,
                trial_counter=state.trial_counter + extra,
            )
        else:
            extra = 1 if state.codify_query_count >= 1 else 0
            state = replace(
                state,
                codify_query_count=state.codify_query_count + 1,
                trial_counter=state.trial_counter + extra,
            )
        assistant = ChatMessage(Role.ASSISTANT, reply.content)
        if state.transcript is None:
            transcript = Conversation(
                (
                    ChatMessage(Role.SYSTEM, prompt.system),
                    ChatMessage(Role.USER, prompt.user),
                    assistant,
                )
            )
        elif state.pending_feedback is not None:
            # The feedback already forms the user turn this reply answers.
            transcript = state.transcript.append(assistant)
        else:
            transcript = state.transcript.append(ChatMessage(Role.USER, prompt.user)).append(
                assistant
            )
        state = replace(state, transcript=transcript, pending_feedback=None)
        return state, reply.content

    def _codify_step(self, state: SessionState) -> SessionState:
        if state.phase is Phase.DESIGN_APPROVED:
            prompt = self._codify_prompt(state)
            origin = ORIGIN_CODIFY
        elif state.phase is Phase.FAILED:
            if state.reports and not state.reports[-1].passed and state.code_versions:
                prompt = self.prompts.render_debug_query(
                    state.code_versions[-1].candidate.source,
                    state.reports[-1],
                    state.revision_feedback,
                )
                origin = ORIGIN_DEBUG
            else:
                # Failed without a report: the previous codify reply had no
                # usable code, so ask again.
                prompt = self._codify_prompt(state)
                origin = ORIGIN_CODIFY
        else:
            raise SessionPhaseError("codify", phase_label(state))
        state, content = self._issue_query(state, prompt, stage="codify")
        candidate = pick_code_candidate(content)
        if candidate is None:
            state = replace(state, phase=Phase.FAILED, failure_count=state.failure_count + 1)
            state = self._with_event(state, "codify-rejected", "reply contains no code block")
        else:
            record = CodeRecord(candidate, origin, self.clock())
            state = replace(
                state,
                phase=Phase.CODE_GENERATED,
                code_versions=state.code_versions + (record,),
                revision_feedback=None,
            )
            state = self._with_event(
                state, "code-generated", f"version {len(state.code_versions)} via {origin}"
            )
        return self._touch(state)

    def _codify_prompt(self, state: SessionState) -> RenderedPrompt:
        observation, action = current_design(state)
        return self.prompts.render_codify_query(
            observation, action, self.api_template, self.coding_rules
        )

    def _validate_once(self, state: SessionState) -> SessionState:
        """Run the harness on the latest candidate. Persists the transient
        Validating phase so pollers can see it; a harness breakdown restores
        the prior phase and re-raises."""
        state = self._with_event(
            replace(state, phase=Phase.VALIDATING),
            "validation-started",
            f"candidate {len(state.code_versions)}",
        )
        state = self._touch(state)
        self.store.save(state)
        observation, action = current_design(state)
        try:
            report = self.executor(
                state.code_versions[-1].candidate.source,
                expected_design_document(observation, action),
                self.execution,
            )
        except HarnessError as exc:
            state = replace(state, phase=Phase.CODE_GENERATED)
            state = self._touch(self._with_event(state, "harness-error", str(exc)))
            self.store.save(state)
            raise
        state = replace(state, reports=state.reports + (report,))
        if report.passed:
            state = replace(state, phase=Phase.EXECUTABLE)
            state = self._with_event(state, "validation-passed", "")
        else:
            state = replace(state, phase=Phase.FAILED, failure_count=state.failure_count + 1)
            detail = report.failure_class.value if report.failure_class else "fail"
            state = self._with_event(state, "validation-failed", detail)
        state = self._touch(state)
        self.store.save(state)
        return state
