"""JSON API: snapshots on every mutation, uniform error bodies, event polling."""

from __future__ import annotations

import itertools
import json

import pytest
from fastapi.testclient import TestClient

from delf_studio.ice_session import SessionEngine, SessionStore
from delf_studio.llm_gateway import ModelReply, ScriptExhausted
from delf_studio.prompt_engine import PromptEngine, load_templates
from delf_studio.sandbox_executor import (
    ExecutionConfig,
    FailureClass,
    Finding,
    HarnessError,
    ValidationReport,
)
from delf_studio.service.http_api import create_app

API = "/api/v1"

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


def pass_report() -> ValidationReport:
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


def fail_report() -> ValidationReport:
    return ValidationReport(
        verdict="fail",
        failure_class=FailureClass.RUNTIME_ERROR,
        stage="episodes",
        findings=(Finding("episode_ok", False, "episode 0 step 3: boom"),),
        error_type="RuntimeError",
        error_message="boom",
        stderr_tail="",
        duration_seconds=0.0,
    )


class QueueBackend:
    """Scripted backend whose queue each test feeds directly."""

    model = "queued"

    def __init__(self):
        self.queue = []
        self.requests = []

    def complete(self, conversation):
        self.requests.append(conversation)
        if not self.queue:
            raise ScriptExhausted(f"script exhausted after {len(self.requests) - 1} replies")
        return ModelReply(self.queue.pop(0), backend_id="queued")


class QueueExecutor:
    """Serves queued reports; an Exception instance in the queue is raised."""

    def __init__(self):
        self.queue = []

    def __call__(self, source, design_document, config):
        if not self.queue:
            raise HarnessError("no scripted verdict queued")
        item = self.queue.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def build_engine(tmp_path, backend, executor) -> SessionEngine:
    ticker = itertools.count()
    ids = itertools.count(1)
    return SessionEngine(
        store=SessionStore(tmp_path / "sessions"),
        backend=backend,
        prompts=PromptEngine(load_templates()),
        execution=ExecutionConfig(harness_command=("scripted",)),
        max_auto_debug=2,
        clock=lambda: float(next(ticker)),
        id_factory=lambda: f"s{next(ids):04d}",
        executor=executor,
    )


@pytest.fixture
def rig(tmp_path):
    backend = QueueBackend()
    executor = QueueExecutor()
    engine = build_engine(tmp_path, backend, executor)
    client = TestClient(create_app(engine))
    return client, backend, executor


def create_session(client) -> str:
    response = client.post(API + "/sessions", json={"description": DESCRIPTION})
    assert response.status_code == 201
    return response.json()["session_id"]


def drive_to_code(client, backend) -> str:
    sid = create_session(client)
    backend.queue.append(DESIGN_REPLY)
    assert client.post(f"{API}/sessions/{sid}/design").status_code == 200
    assert client.post(f"{API}/sessions/{sid}/approve").status_code == 200
    backend.queue.append(code_reply("v1"))
    assert client.post(f"{API}/sessions/{sid}/codify").status_code == 200
    return sid


def assert_error(response, status: int, code: str) -> str:
    assert response.status_code == status
    body = response.json()
    assert set(body) == {"status", "code", "message"}
    assert body["status"] == status
    assert body["code"] == code
    return body["message"]


class TestSessions:
    def test_create_returns_snapshot(self, rig):
        client, _, _ = rig
        response = client.post(API + "/sessions", json={"description": DESCRIPTION})
        assert response.status_code == 201
        body = response.json()
        assert body["session_id"] == "s0001"
        assert body["phase"] == "Drafting"
        assert body["phase_label"] == "Drafting"
        assert body["description"] == DESCRIPTION
        assert body["events"][0]["kind"] == "created"

    def test_get_and_list(self, rig):
        client, _, _ = rig
        first = create_session(client)
        second = create_session(client)
        assert client.get(f"{API}/sessions/{first}").json()["session_id"] == first
        listed = client.get(API + "/sessions").json()["sessions"]
        assert [s["session_id"] for s in listed] == [first, second]
        assert listed[0]["phase"] == "Drafting"
        assert listed[0]["description_tokens"] == 23

    def test_unknown_session(self, rig):
        client, _, _ = rig
        message = assert_error(client.get(f"{API}/sessions/nope"), 404, "session-not-found")
        assert "nope" in message

    def test_unknown_route(self, rig):
        client, _, _ = rig
        assert_error(client.get(f"{API}/bogus"), 404, "not-found")


class TestBodyValidation:
    def test_create_without_body(self, rig):
        client, _, _ = rig
        assert_error(client.post(API + "/sessions"), 422, "invalid-body")

    def test_create_with_non_json_body(self, rig):
        client, _, _ = rig
        response = client.post(API + "/sessions", content=b"not json")
        assert_error(response, 422, "invalid-body")

    def test_create_with_non_object_body(self, rig):
        client, _, _ = rig
        response = client.post(API + "/sessions", json=["hello"])
        assert_error(response, 422, "invalid-body")

    def test_description_must_be_string(self, rig):
        client, _, _ = rig
        response = client.post(API + "/sessions", json={"description": 7})
        message = assert_error(response, 422, "invalid-body")
        assert "'description' must be a string" in message

    def test_blank_description_rejected(self, rig):
        client, _, _ = rig
        response = client.post(API + "/sessions", json={"description": "   "})
        message = assert_error(response, 422, "invalid-body")
        assert "must not be empty" in message

    def test_feedback_needs_text(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        client.post(f"{API}/sessions/{sid}/design")
        response = client.post(f"{API}/sessions/{sid}/feedback", json={})
        message = assert_error(response, 422, "invalid-body")
        assert "'feedback' must be a string" in message


class TestWorkflow:
    def test_happy_path_with_auto_debug(self, rig):
        client, backend, executor = rig
        sid = create_session(client)

        backend.queue.append(DESIGN_REPLY)
        body = client.post(f"{API}/sessions/{sid}/design").json()
        assert body["phase"] == "DesignProposed"
        assert len(body["design_history"]) == 1
        assert body["design_history"][0]["provenance"] == "model"

        assert client.post(f"{API}/sessions/{sid}/approve").json()["phase"] == "DesignApproved"

        backend.queue.append(code_reply("v1"))
        body = client.post(f"{API}/sessions/{sid}/codify").json()
        assert body["phase"] == "CodeGenerated"
        assert len(body["code_versions"]) == 1

        # first run fails, the auto-debug reply fixes it, second run passes
        executor.queue.extend([fail_report(), pass_report()])
        backend.queue.append(code_reply("v2"))
        body = client.post(f"{API}/sessions/{sid}/validate").json()
        assert body["phase"] == "Executable"
        assert body["phase_label"] == "Executable"
        assert [r["verdict"] for r in body["reports"]] == ["fail", "pass"]
        assert len(body["code_versions"]) == 2
        assert body["code_versions"][1]["origin"] == "debug"

        metrics = client.get(f"{API}/sessions/{sid}/metrics").json()
        assert metrics == {
            "description_tokens": 23,
            "trials_to_execution": 1,
            "space_kind": "Discrete",
            "outcome": "Executable",
        }

    def test_rejected_reply_reported_through_events(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(MALFORMED_REPLY)
        body = client.post(f"{API}/sessions/{sid}/design").json()
        assert body["phase"] == "Drafting"
        assert body["events"][-1]["kind"] == "reply-rejected"

    def test_feedback_then_revision(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        client.post(f"{API}/sessions/{sid}/design")
        body = client.post(
            f"{API}/sessions/{sid}/feedback", json={"feedback": "add a lock_open flag"}
        ).json()
        assert body["phase"] == "DesignProposed"
        assert body["events"][-1]["kind"] == "feedback-submitted"
        backend.queue.append(DESIGN_REPLY)
        body = client.post(f"{API}/sessions/{sid}/design").json()
        assert len(body["design_history"]) == 2

    def test_approve_with_edited_design(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        proposed = client.post(f"{API}/sessions/{sid}/design").json()
        observation = proposed["design_history"][0]["observation"]
        action = proposed["design_history"][0]["action"]
        observation["attributes"][0]["description"] = "Column index, zero-based"
        body = client.post(
            f"{API}/sessions/{sid}/approve",
            json={"edited": {"observation": observation, "action": action}},
        ).json()
        assert body["phase"] == "DesignApproved"
        assert body["design_history"][-1]["provenance"] == "user-revised"
        assert (
            body["design_history"][-1]["observation"]["attributes"][0]["description"]
            == "Column index, zero-based"
        )

    def test_edited_design_needs_both_documents(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        proposed = client.post(f"{API}/sessions/{sid}/design").json()
        observation = proposed["design_history"][0]["observation"]
        response = client.post(
            f"{API}/sessions/{sid}/approve", json={"edited": {"observation": observation}}
        )
        message = assert_error(response, 422, "invalid-body")
        assert "'edited' must hold 'observation' and 'action' documents" in message

    def test_edited_design_must_decode(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        proposed = client.post(f"{API}/sessions/{sid}/design").json()
        observation = proposed["design_history"][0]["observation"]
        action = proposed["design_history"][0]["action"]
        # duplicate attribute names decode to an invalid choice
        observation["attributes"][1]["name"] = observation["attributes"][0]["name"]
        response = client.post(
            f"{API}/sessions/{sid}/approve",
            json={"edited": {"observation": observation, "action": action}},
        )
        message = assert_error(response, 422, "invalid-body")
        assert "invalid design choice" in message

    def test_abandon(self, rig):
        client, _, _ = rig
        sid = create_session(client)
        body = client.post(f"{API}/sessions/{sid}/abandon").json()
        assert body["phase"] == "Abandoned"
        metrics = client.get(f"{API}/sessions/{sid}/metrics").json()
        assert metrics["outcome"] == "Abandoned"
        assert metrics["trials_to_execution"] is None


class TestPhaseGuards:
    def test_codify_before_approval(self, rig):
        client, _, _ = rig
        sid = create_session(client)
        message = assert_error(client.post(f"{API}/sessions/{sid}/codify"), 409, "wrong-phase")
        assert "not allowed in phase Drafting" in message

    def test_metrics_before_terminal_phase(self, rig):
        client, _, _ = rig
        sid = create_session(client)
        assert_error(client.get(f"{API}/sessions/{sid}/metrics"), 409, "wrong-phase")


class TestUpstreamFailures:
    def test_exhausted_backend_is_gateway_failure(self, rig):
        client, _, _ = rig
        sid = create_session(client)
        response = client.post(f"{API}/sessions/{sid}/design")
        assert_error(response, 502, "gateway-failure")

    def test_harness_breakdown_is_harness_failure(self, rig):
        client, backend, executor = rig
        sid = drive_to_code(client, backend)
        executor.queue.append(HarnessError("harness wrote no report file"))
        response = client.post(f"{API}/sessions/{sid}/validate")
        message = assert_error(response, 502, "harness-failure")
        assert "no report file" in message
        # the candidate survives the breakdown and can be validated again
        body = client.get(f"{API}/sessions/{sid}").json()
        assert body["phase"] == "CodeGenerated"
        assert body["events"][-1]["kind"] == "harness-error"
        executor.queue.append(pass_report())
        assert client.post(f"{API}/sessions/{sid}/validate").json()["phase"] == "Executable"


class TestCodeVersions:
    def test_fetch_version(self, rig):
        client, backend, _ = rig
        sid = drive_to_code(client, backend)
        body = client.get(f"{API}/sessions/{sid}/code/1").json()
        assert body["version"] == 1
        assert body["language_tag"] == "python"
        assert "# MARKER: v1" in body["source"]
        assert body["origin"] == "codify"

    def test_version_out_of_range(self, rig):
        client, backend, _ = rig
        sid = drive_to_code(client, backend)
        for version in (0, 2):
            message = assert_error(
                client.get(f"{API}/sessions/{sid}/code/{version}"), 404, "not-found"
            )
            assert "1 code version(s)" in message

    def test_version_must_be_integer(self, rig):
        client, backend, _ = rig
        sid = drive_to_code(client, backend)
        assert_error(client.get(f"{API}/sessions/{sid}/code/latest"), 422, "invalid-body")


class TestEvents:
    def test_cursor_polling(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        client.post(f"{API}/sessions/{sid}/design")

        body = client.get(f"{API}/sessions/{sid}/events").json()
        assert [e["kind"] for e in body["events"]] == ["created", "design-proposed"]
        assert body["phase"] == "DesignProposed"
        cursor = body["cursor"]

        # nothing new: same cursor comes back and the suffix is empty
        body = client.get(f"{API}/sessions/{sid}/events", params={"cursor": cursor}).json()
        assert body["events"] == []
        assert body["cursor"] == cursor

        client.post(f"{API}/sessions/{sid}/approve")
        body = client.get(f"{API}/sessions/{sid}/events", params={"cursor": cursor}).json()
        assert [e["kind"] for e in body["events"]] == ["design-approved"]
        assert body["cursor"] == cursor + 1

    def test_replaying_an_old_cursor_is_stable(self, rig):
        client, backend, _ = rig
        sid = create_session(client)
        backend.queue.append(DESIGN_REPLY)
        client.post(f"{API}/sessions/{sid}/design")
        first = client.get(f"{API}/sessions/{sid}/events", params={"cursor": 1}).json()
        second = client.get(f"{API}/sessions/{sid}/events", params={"cursor": 1}).json()
        assert first == second


class TestStaticAssets:
    """Built browser-UI files mount under / beside the API when configured."""

    def test_ui_directory_served_at_root_with_api_intact(self, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        ui.joinpath("index.html").write_text(
            "<!DOCTYPE html><title>studio</title>", encoding="utf-8"
        )
        ui.joinpath("app.js").write_text("console.log('ui')", encoding="utf-8")
        engine = build_engine(tmp_path, QueueBackend(), QueueExecutor())
        client = TestClient(create_app(engine, static_dir=ui))

        index = client.get("/")
        assert index.status_code == 200
        assert "studio" in index.text
        assert client.get("/app.js").text == "console.log('ui')"
        # API routes keep precedence over the mount
        assert client.get(API + "/sessions").json() == {"sessions": []}

    def test_root_is_not_served_without_a_ui_directory(self, rig):
        client, _, _ = rig
        assert client.get("/").status_code == 404
