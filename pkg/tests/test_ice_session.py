"""Session state machine: phases, counting, transcript, persistence."""

from __future__ import annotations

import itertools
import json
import random
import sys
from pathlib import Path

import pytest

from delf_studio.chat import Role
from delf_studio.design_schema import (
    Attribute,
    ComponentKind,
    DesignChoice,
    DiscreteQuant,
    InvalidDesignChoice,
    SpaceKind,
)
from delf_studio.ice_session import (
    Phase,
    SessionEngine,
    SessionError,
    SessionNotFound,
    SessionPhaseError,
    SessionState,
    SessionStore,
    StorageCorruption,
    current_design,
    events_since,
    expected_design_document,
    metrics_for,
    phase_label,
    session_from_dict,
    session_to_dict,
    write_metrics_csv,
)
from delf_studio.llm_gateway import ScriptedBackend, ScriptExhausted
from delf_studio.prompt_engine import PromptEngine, load_templates
from delf_studio.sandbox_executor import ExecutionConfig, FailureClass, HarnessError

FAKE_HARNESS = Path(__file__).parent / "fake_harness.py"

DESCRIPTION = (
    "An agent moves through a small grid world, must first pick up a key, "
    "and then open a lock to finish the task."
)

DESIGN_REPLY = """OBSERVATION:
agent_x | Column index of the agent | discrete{0,1,2}
agent_y | Row index of the agent | discrete{0,1,2}
has_key | Whether the key has been picked up | discrete{0,1}
ACTION:
move | Direction to move, one of N S E W | discrete{0,1,2,3}
"""

REVISED_DESIGN_REPLY = """OBSERVATION:
agent_x | Column index of the agent | discrete{0,1,2}
agent_y | Row index of the agent | discrete{0,1,2}
has_key | Whether the key has been picked up | discrete{0,1}
lock_open | Whether the lock has been opened | discrete{0,1}
ACTION:
move | Direction to move, one of N S E W | discrete{0,1,2,3}
"""

REFUSAL_REPLY = "I cannot help with designing that environment."
MALFORMED_REPLY = "Sounds like a fun task! Let me think about it for a while."


def code_reply(marker: str) -> str:
    return (
        "Here is the environment module.\n\n"
        "```python\n"
        f"# MARKER: {marker}\n"
        "class Environment:\n"
        "    pass\n"
        "```\n"
    )


def keylock_design() -> tuple[DesignChoice, DesignChoice]:
    observation = DesignChoice(
        ComponentKind.OBSERVATION,
        (
            Attribute("agent_x", "Column index of the agent", DiscreteQuant((0, 1, 2))),
            Attribute("agent_y", "Row index of the agent", DiscreteQuant((0, 1, 2))),
            Attribute("has_key", "Whether the key is held", DiscreteQuant((0, 1))),
        ),
    )
    action = DesignChoice(
        ComponentKind.ACTION,
        (Attribute("move", "Direction to move", DiscreteQuant((0, 1, 2, 3))),),
    )
    return observation, action


def make_engine(tmp_path, replies, auto_debug=False, max_auto_debug=10):
    store = SessionStore(tmp_path / "sessions")
    backend = ScriptedBackend(list(replies))
    ticker = itertools.count()
    ids = itertools.count(1)
    engine = SessionEngine(
        store=store,
        backend=backend,
        prompts=PromptEngine(load_templates()),
        execution=ExecutionConfig(
            harness_command=(sys.executable, str(FAKE_HARNESS)), time_limit_seconds=10.0
        ),
        auto_debug=auto_debug,
        max_auto_debug=max_auto_debug,
        clock=lambda: float(next(ticker)),
        id_factory=lambda: f"s{next(ids):04d}",
    )
    return engine, backend, store


def run_to_phase(engine, target: Phase, replies_hint: str = "") -> SessionState:
    """Drive a fresh session along the happy path up to the target phase.
    The scripted backend must hold the right replies."""
    state = engine.create_session(DESCRIPTION)
    if target is Phase.DRAFTING:
        return state
    state = engine.propose_design(state.session_id)
    if target is Phase.DESIGN_PROPOSED:
        return state
    state = engine.approve_design(state.session_id)
    if target is Phase.DESIGN_APPROVED:
        return state
    state = engine.codify(state.session_id)
    if target is Phase.CODE_GENERATED:
        return state
    state = engine.validate(state.session_id)
    return state


class TestCreate:
    def test_fresh_session(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        assert state.phase is Phase.DRAFTING
        assert state.trial_counter == 0
        assert state.description == DESCRIPTION
        assert state.transcript is None
        assert [e.kind for e in state.events] == ["created"]
        assert store.load(state.session_id) == state  # persisted immediately

    def test_empty_description_rejected(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        with pytest.raises(ValueError, match="empty"):
            engine.create_session("   \n")

    def test_duplicate_creates_get_distinct_ids(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        a = engine.create_session(DESCRIPTION)
        b = engine.create_session(DESCRIPTION)
        assert a.session_id != b.session_id


class TestProposeDesign:
    def test_happy_path(self, tmp_path):
        engine, backend, store = make_engine(tmp_path, [DESIGN_REPLY])
        state = engine.create_session(DESCRIPTION)
        state = engine.propose_design(state.session_id)
        assert state.phase is Phase.DESIGN_PROPOSED
        assert len(state.design_history) == 1
        assert state.design_history[0].provenance == "model"
        observation, action = current_design(state)
        assert [a.name for a in observation.attributes] == ["agent_x", "agent_y", "has_key"]
        assert state.trial_counter == 0  # the first design query is free
        assert state.design_query_count == 1
        # The query itself is a self-contained [system, user] pair.
        sent = backend.requests[0]
        assert [m.role for m in sent.messages] == [Role.SYSTEM, Role.USER]
        assert DESCRIPTION in sent.messages[1].content
        # The audit transcript captured system, user, assistant.
        assert [m.role for m in state.transcript.messages] == [
            Role.SYSTEM,
            Role.USER,
            Role.ASSISTANT,
        ]
        assert state.transcript.messages[2].content == DESIGN_REPLY
        assert store.load(state.session_id) == state

    @pytest.mark.parametrize(
        "reply,expected_detail",
        [
            (REFUSAL_REPLY, "refusal"),
            (MALFORMED_REPLY, "malformed"),
            (code_reply("pass"), "code"),
        ],
    )
    def test_rejected_reply_keeps_phase(self, tmp_path, reply, expected_detail):
        engine, _, _ = make_engine(tmp_path, [reply, DESIGN_REPLY])
        state = engine.create_session(DESCRIPTION)
        state = engine.propose_design(state.session_id)
        assert state.phase is Phase.DRAFTING
        assert state.design_history == ()
        assert state.trial_counter == 0  # still the free initial query
        assert state.events[-1].kind == "reply-rejected"
        assert state.events[-1].detail == expected_detail
        # The retry is a second model query, so it costs one trial.
        state = engine.propose_design(state.session_id)
        assert state.phase is Phase.DESIGN_PROPOSED
        assert state.trial_counter == 1

    def test_revision_after_feedback(self, tmp_path):
        engine, backend, _ = make_engine(tmp_path, [DESIGN_REPLY, REVISED_DESIGN_REPLY])
        state = engine.create_session(DESCRIPTION)
        state = engine.propose_design(state.session_id)
        state = engine.submit_feedback(state.session_id, "also track whether the lock is open")
        state = engine.propose_design(state.session_id)
        assert state.phase is Phase.DESIGN_PROPOSED
        assert len(state.design_history) == 2
        assert state.trial_counter == 1  # revision query costs one
        observation, _ = current_design(state)
        assert "lock_open" in [a.name for a in observation.attributes]
        # The revision prompt embeds the feedback and the current design.
        revision_query = backend.requests[1]
        assert "also track whether the lock is open" in revision_query.messages[1].content
        assert "agent_x" in revision_query.messages[1].content
        # Audit transcript: the feedback is the user turn the revision answers.
        roles = [m.role for m in state.transcript.messages]
        assert roles == [Role.SYSTEM, Role.USER, Role.ASSISTANT, Role.USER, Role.ASSISTANT]
        assert state.transcript.messages[3].content == "also track whether the lock is open"
        assert state.pending_feedback is None
        assert state.revision_feedback is None

    def test_reproposal_without_feedback_rejected(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        with pytest.raises(SessionPhaseError, match="feedback"):
            engine.propose_design(state.session_id)

    def test_wrong_phase_rejected(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_APPROVED)
        with pytest.raises(SessionPhaseError):
            engine.propose_design(state.session_id)

    def test_gateway_error_leaves_state_unchanged(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [])  # nothing scripted
        state = engine.create_session(DESCRIPTION)
        before = store.load(state.session_id)
        with pytest.raises(ScriptExhausted):
            engine.propose_design(state.session_id)
        assert store.load(state.session_id) == before


class TestSubmitFeedback:
    def test_requires_review_or_failed_phase(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        with pytest.raises(SessionPhaseError):
            engine.submit_feedback(state.session_id, "hello")

    def test_empty_feedback_rejected(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        with pytest.raises(ValueError, match="empty"):
            engine.submit_feedback(state.session_id, "  ")

    def test_feedback_becomes_pending_user_turn(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        state = engine.submit_feedback(state.session_id, "rename move to direction")
        assert state.pending_feedback == "rename move to direction"
        assert state.transcript.messages[-1].role is Role.USER
        assert state.events[-1].kind == "feedback-submitted"

    def test_consecutive_feedback_merges(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        state = engine.submit_feedback(state.session_id, "first point")
        n_messages = len(state.transcript.messages)
        state = engine.submit_feedback(state.session_id, "second point")
        assert len(state.transcript.messages) == n_messages  # rewritten, not appended
        assert state.pending_feedback == "first point\n\nsecond point"
        assert state.transcript.messages[-1].content == "first point\n\nsecond point"

    def test_failed_phase_feedback_feeds_debug_prompt(self, tmp_path):
        engine, backend, _ = make_engine(
            tmp_path, [DESIGN_REPLY, code_reply("contract"), code_reply("pass")]
        )
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.FAILED
        state = engine.submit_feedback(state.session_id, "the observation tuple is too short")
        state = engine.codify(state.session_id)
        assert state.phase is Phase.CODE_GENERATED
        debug_query = backend.requests[-1]
        assert "the observation tuple is too short" in debug_query.messages[1].content


class TestApproveDesign:
    def test_approve_as_is(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        state = engine.approve_design(state.session_id)
        assert state.phase is Phase.DESIGN_APPROVED
        assert len(state.design_history) == 1
        assert state.trial_counter == 0

    def test_approve_with_edit(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        observation, action = keylock_design()
        state = engine.approve_design(state.session_id, edited=(observation, action))
        assert state.phase is Phase.DESIGN_APPROVED
        assert len(state.design_history) == 2
        assert state.design_history[-1].provenance == "user-revised"
        assert state.trial_counter == 0  # user edits are not model queries

    def test_invalid_edit_rejected_without_state_change(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        observation, action = keylock_design()
        dupe = DesignChoice(
            ComponentKind.OBSERVATION,
            observation.attributes + (observation.attributes[0],),
        )
        with pytest.raises(InvalidDesignChoice):
            engine.approve_design(state.session_id, edited=(dupe, action))
        assert store.load(state.session_id) == state

    def test_wrong_phase(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        with pytest.raises(SessionPhaseError):
            engine.approve_design(state.session_id)


class TestCodify:
    def test_first_codify_is_free(self, tmp_path):
        engine, backend, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        assert state.phase is Phase.CODE_GENERATED
        assert len(state.code_versions) == 1
        assert state.code_versions[0].origin == "codify"
        assert "# MARKER: pass" in state.code_versions[0].candidate.source
        assert state.trial_counter == 0
        codify_query = backend.requests[-1]
        assert "class Environment" in codify_query.messages[1].content  # the skeleton
        assert "agent_x" in codify_query.messages[1].content  # the design

    def test_no_code_block_fails_then_retry_costs_one(self, tmp_path):
        engine, _, _ = make_engine(
            tmp_path, [DESIGN_REPLY, "I would write code here.", code_reply("pass")]
        )
        state = run_to_phase(engine, Phase.DESIGN_APPROVED)
        state = engine.codify(state.session_id)
        assert state.phase is Phase.FAILED
        assert state.failure_count == 1
        assert state.trial_counter == 0  # the free initial codify query
        assert state.events[-1].kind == "codify-rejected"
        state = engine.codify(state.session_id)  # re-issues the codify query
        assert state.phase is Phase.CODE_GENERATED
        assert state.trial_counter == 1
        assert phase_label(state) == "CodeGenerated"

    def test_debug_query_after_failure_costs_one(self, tmp_path):
        engine, backend, _ = make_engine(
            tmp_path, [DESIGN_REPLY, code_reply("contract"), code_reply("pass")]
        )
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.FAILED
        state = engine.codify(state.session_id)
        assert state.phase is Phase.CODE_GENERATED
        assert state.trial_counter == 1
        assert state.code_versions[-1].origin == "debug"
        debug_query = backend.requests[-1]
        assert "ApiContractViolation" in debug_query.messages[1].content
        assert "# MARKER: contract" in debug_query.messages[1].content  # failing source

    def test_wrong_phase(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        with pytest.raises(SessionPhaseError):
            engine.codify(state.session_id)


class TestValidate:
    def test_pass_reaches_executable(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.EXECUTABLE
        assert len(state.reports) == 1 and state.reports[-1].passed
        kinds = [e.kind for e in state.events]
        assert "validation-started" in kinds and kinds[-1] == "validation-passed"

    def test_fail_increments_failure_count(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("contract")])
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.FAILED
        assert state.failure_count == 1
        assert phase_label(state) == "Failed(1)"
        assert state.reports[-1].failure_class is FailureClass.API_CONTRACT_VIOLATION
        assert state.events[-1].kind == "validation-failed"
        assert state.events[-1].detail == "ApiContractViolation"

    def test_harness_breakdown_restores_phase(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [DESIGN_REPLY, code_reply("internal")])
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        trials_before = state.trial_counter
        with pytest.raises(HarnessError):
            engine.validate(state.session_id)
        reloaded = store.load(state.session_id)
        assert reloaded.phase is Phase.CODE_GENERATED
        assert reloaded.reports == ()  # not a candidate verdict
        assert reloaded.trial_counter == trials_before
        assert reloaded.events[-1].kind == "harness-error"

    def test_wrong_phase(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        with pytest.raises(SessionPhaseError):
            engine.validate(state.session_id)


class TestAutoDebug:
    def test_failure_triggers_automatic_debug_round(self, tmp_path):
        engine, _, _ = make_engine(
            tmp_path,
            [DESIGN_REPLY, code_reply("contract"), code_reply("pass")],
            auto_debug=True,
        )
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.EXECUTABLE
        assert state.trial_counter == 1  # one debug query
        assert [r.origin for r in state.code_versions] == ["codify", "debug"]
        kinds = [e.kind for e in state.events]
        assert kinds.count("validation-failed") == 1
        assert kinds.count("validation-passed") == 1

    def test_budget_exhaustion_stops_the_loop(self, tmp_path):
        engine, _, _ = make_engine(
            tmp_path,
            [DESIGN_REPLY] + [code_reply("contract")] * 3,
            auto_debug=True,
            max_auto_debug=2,
        )
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.FAILED
        assert state.failure_count == 3  # initial failure + two debug rounds
        assert state.trial_counter == 2
        assert state.events[-1].kind == "auto-debug-exhausted"

    def test_unusable_debug_reply_consumes_budget(self, tmp_path):
        engine, _, _ = make_engine(
            tmp_path,
            [DESIGN_REPLY, code_reply("contract"), "no code in this reply", code_reply("pass")],
            auto_debug=True,
            max_auto_debug=3,
        )
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        assert state.phase is Phase.EXECUTABLE
        assert state.trial_counter == 2  # rejected debug reply still cost a query
        assert state.failure_count == 2  # validation failure + rejected reply


class TestAbandonAndMetrics:
    def test_abandon_unresolved_metrics(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        state = engine.abandon(state.session_id)
        assert state.phase is Phase.ABANDONED
        metrics = engine.finalize_metrics(state.session_id)
        assert metrics.outcome == "Abandoned"
        assert metrics.trials_to_execution is None
        assert metrics.space_kind is None
        assert metrics.description_tokens == len(DESCRIPTION.split())

    def test_abandon_terminal_phases_rejected(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.EXECUTABLE)
        with pytest.raises(SessionPhaseError):
            engine.abandon(state.session_id)

    def test_metrics_for_executable_session(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.EXECUTABLE)
        metrics = engine.finalize_metrics(state.session_id)
        assert metrics.outcome == "Executable"
        assert metrics.trials_to_execution == 0
        assert metrics.space_kind is SpaceKind.DISCRETE
        assert metrics == engine.finalize_metrics(state.session_id)  # idempotent

    def test_metrics_wrong_phase(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY])
        state = run_to_phase(engine, Phase.DESIGN_PROPOSED)
        with pytest.raises(SessionPhaseError):
            engine.finalize_metrics(state.session_id)
        with pytest.raises(SessionPhaseError):
            metrics_for(state)


class TestMetricsCsv:
    def test_layout_and_unresolved(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.EXECUTABLE)
        done = engine.finalize_metrics(state.session_id)
        abandoned = engine.create_session("one two three")
        abandoned = engine.abandon(abandoned.session_id)
        out = tmp_path / "metrics.csv"
        write_metrics_csv(
            [("Key-Lock", done), ("Left-Behind", engine.finalize_metrics(abandoned.session_id))],
            out,
        )
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "environment,space_kind,description_tokens,trials_to_execution"
        assert lines[1] == f"Key-Lock,Discrete,{len(DESCRIPTION.split())},0"
        assert lines[2] == "Left-Behind,unknown,3,unresolved"


class TestExpectedDesignDocument:
    def test_keylock_shape(self):
        observation, action = keylock_design()
        doc = json.loads(expected_design_document(observation, action))
        assert doc["schema_version"] == 1
        assert doc["action"] == {"kind": "discrete", "cardinality": 4}
        assert doc["observation"]["kind"] == "composite"
        assert set(doc["observation"]["entries"]) == {"agent_x", "agent_y", "has_key"}


class TestPersistence:
    def test_round_trip_at_every_step(self, tmp_path):
        engine, _, store = make_engine(
            tmp_path, [DESIGN_REPLY, code_reply("contract"), code_reply("pass")]
        )
        state = engine.create_session(DESCRIPTION)
        sid = state.session_id
        for op in (
            lambda: engine.propose_design(sid),
            lambda: engine.approve_design(sid),
            lambda: engine.codify(sid),
            lambda: engine.validate(sid),
            lambda: engine.submit_feedback(sid, "observation shape is wrong"),
            lambda: engine.codify(sid),
            lambda: engine.validate(sid),
        ):
            state = op()
            assert store.load(sid) == state
        assert state.phase is Phase.EXECUTABLE
        assert state.trial_counter == 1

    def test_serialization_identity(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("contract")])
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        state = engine.validate(state.session_id)
        clone = session_from_dict(json.loads(json.dumps(session_to_dict(state))))
        assert clone == state

    def test_no_temp_files_left_behind(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [DESIGN_REPLY])
        run_to_phase(engine, Phase.DESIGN_PROPOSED)
        assert not list(store.root.glob("*.tmp"))

    def test_missing_session(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [])
        with pytest.raises(SessionNotFound):
            engine.get("nope")

    def test_corrupt_file_reported(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        store.session_path(state.session_id).write_text("{not json", encoding="utf-8")
        with pytest.raises(StorageCorruption):
            store.load(state.session_id)

    def test_unsupported_schema_version(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [])
        state = engine.create_session(DESCRIPTION)
        doc = session_to_dict(state)
        doc["schema_version"] = 99
        store.session_path(state.session_id).write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(StorageCorruption, match="schema_version"):
            store.load(state.session_id)

    def test_index_lists_sessions(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [DESIGN_REPLY, code_reply("contract")])
        a = engine.create_session(DESCRIPTION)
        state = run_to_phase(engine, Phase.CODE_GENERATED)
        engine.validate(state.session_id)
        listed = store.list_sessions()
        assert [s.session_id for s in listed] == [a.session_id, state.session_id]
        by_id = {s.session_id: s for s in listed}
        assert by_id[state.session_id].phase == "Failed(1)"
        assert by_id[a.session_id].description_tokens == len(DESCRIPTION.split())

    def test_index_rebuild_matches(self, tmp_path):
        engine, _, store = make_engine(tmp_path, [DESIGN_REPLY])
        run_to_phase(engine, Phase.DESIGN_PROPOSED)
        before = store.list_sessions()
        store.index_path.unlink()
        assert store.list_sessions() == before


class TestEvents:
    def test_cursors_are_contiguous_and_stable(self, tmp_path):
        engine, _, _ = make_engine(tmp_path, [DESIGN_REPLY, code_reply("pass")])
        state = run_to_phase(engine, Phase.EXECUTABLE)
        assert [e.cursor for e in state.events] == list(range(1, len(state.events) + 1))
        tail = events_since(state, 2)
        assert tail == state.events[2:]
        assert events_since(state, 2) == tail  # re-poll replays identically
        assert events_since(state, len(state.events)) == ()


# ---------------------------------------------------------------------------
# Random operation sequences against a transition-table oracle.


DESIGN_STAGE_REPLIES = {
    "design": DESIGN_REPLY,
    "revised": REVISED_DESIGN_REPLY,
    "refusal": REFUSAL_REPLY,
    "malformed": MALFORMED_REPLY,
}
CODIFY_STAGE_REPLIES = {
    "pass": code_reply("pass"),
    "contract": code_reply("contract"),
    "runtime": code_reply("runtime"),
    "nocode": "there is no fenced block here",
}


class QueueBackend:
    """Scripted backend whose queue the driver feeds one reply at a time."""

    model = "queued"

    def __init__(self):
        self.queue = []
        self.requests = []

    def complete(self, conversation):
        self.requests.append(conversation)
        from delf_studio.llm_gateway import ModelReply

        if not self.queue:
            raise ScriptExhausted("queue is empty")
        return ModelReply(self.queue.pop(0), backend_id="queued")


class Model:
    """Pure mirror of the declared transition graph and counting rule."""

    def __init__(self):
        self.phase = Phase.DRAFTING
        self.failures = 0
        self.trials = 0
        self.design_queries = 0
        self.codify_queries = 0
        self.designs = 0
        self.codes = 0
        self.reports = 0
        self.has_feedback = False  # revision/debug hint outstanding
        self.last_marker = None

    def count_design_query(self):
        if self.design_queries >= 1:
            self.trials += 1
        self.design_queries += 1

    def count_codify_query(self):
        if self.codify_queries >= 1:
            self.trials += 1
        self.codify_queries += 1


def apply_propose(model: Model, reply_key: str):
    model.count_design_query()
    if reply_key in ("design", "revised"):
        model.phase = Phase.DESIGN_PROPOSED
        model.designs += 1
        model.has_feedback = False


def apply_codify(model: Model, reply_key: str):
    model.count_codify_query()
    if reply_key == "nocode":
        model.phase = Phase.FAILED
        model.failures += 1
    else:
        model.phase = Phase.CODE_GENERATED
        model.codes += 1
        model.has_feedback = False
        model.last_marker = reply_key


def apply_validate(model: Model):
    model.reports += 1
    if model.last_marker == "pass":
        model.phase = Phase.EXECUTABLE
    else:
        model.phase = Phase.FAILED
        model.failures += 1


@pytest.mark.parametrize("seed", [11, 29, 47])
def test_random_operation_sequences(tmp_path, seed):
    rng = random.Random(seed)
    store = SessionStore(tmp_path / "sessions")
    backend = QueueBackend()
    ticker = itertools.count()
    ids = itertools.count(1)
    engine = SessionEngine(
        store=store,
        backend=backend,
        prompts=PromptEngine(load_templates()),
        execution=ExecutionConfig(
            harness_command=(sys.executable, str(FAKE_HARNESS)), time_limit_seconds=10.0
        ),
        auto_debug=False,
        clock=lambda: float(next(ticker)),
        id_factory=lambda: f"s{next(ids):05d}",
    )
    for _ in range(40):
        run_random_session(rng, engine, backend, store, n_ops=12)


def run_random_session(rng, engine, backend, store, n_ops):
    model = Model()
    state = engine.create_session(DESCRIPTION)
    sid = state.session_id
    for _ in range(n_ops):
        if model.phase in (Phase.EXECUTABLE, Phase.ABANDONED):
            break
        op = rng.choice(["propose", "feedback", "approve", "codify", "validate", "abandon"])
        before = store.load(sid)
        try:
            if op == "propose":
                if model.phase is Phase.DRAFTING:
                    key = rng.choice(["design", "refusal", "malformed"])
                elif model.phase is Phase.DESIGN_PROPOSED and model.has_feedback:
                    key = rng.choice(["revised", "malformed"])
                else:
                    key = None  # engine must refuse before consuming a reply
                if key is not None:
                    backend.queue.append(DESIGN_STAGE_REPLIES[key])
                state = engine.propose_design(sid)
                apply_propose(model, key)
            elif op == "feedback":
                state = engine.submit_feedback(sid, "tighten the bounds")
                model.has_feedback = True
            elif op == "approve":
                state = engine.approve_design(sid)
                model.phase = Phase.DESIGN_APPROVED
                model.has_feedback = False
            elif op == "codify":
                if model.phase in (Phase.DESIGN_APPROVED, Phase.FAILED):
                    key = rng.choice(["pass", "contract", "runtime", "nocode"])
                    backend.queue.append(CODIFY_STAGE_REPLIES[key])
                else:
                    key = None
                state = engine.codify(sid)
                apply_codify(model, key)
            elif op == "validate":
                state = engine.validate(sid)
                apply_validate(model)
            else:
                state = engine.abandon(sid)
                model.phase = Phase.ABANDONED
        except SessionPhaseError:
            assert store.load(sid) == before, f"failed {op} must not change state"
            assert not backend.queue, "refused operations must not consume replies"
            continue
        # The engine agrees with the oracle after every accepted operation.
        assert state.phase is model.phase
        assert state.trial_counter == model.trials
        assert state.failure_count == model.failures
        assert len(state.design_history) == model.designs
        assert len(state.code_versions) == model.codes
        assert len(state.reports) == model.reports
        assert store.load(sid) == state  # crash-safe persistence
        assert [e.cursor for e in state.events] == list(range(1, len(state.events) + 1))
    final = store.load(sid)
    expected_trials = max(model.design_queries - 1, 0) + max(model.codify_queries - 1, 0)
    assert final.trial_counter == expected_trials
    if final.phase is Phase.EXECUTABLE:
        assert final.reports[-1].passed
