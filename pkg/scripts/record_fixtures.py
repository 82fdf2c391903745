#!/usr/bin/env python3
"""Regenerate the bundled replay scenarios.

Each scenario drives the real session engine with scripted model replies and
validates every candidate through the real conformance harness in a child
process. The model traffic is recorded to transcript.jsonl and the harness
reports are snapshotted into scenario.json as the validation script, so
replaying the scenario later needs neither a model nor candidate execution
yet renders byte-identical prompts.

Candidate versions are built backwards from a vetted final source: each
planted defect is a small textual patch, and version k carries defects k..N.
The script asserts that every version fails the harness on exactly the check
its debug round claims to fix, then self-checks each written scenario with a
full replay.

Usage: python3 scripts/record_fixtures.py [--out DIR]
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from delf_studio.ice_session import (
    Phase,
    SessionEngine,
    SessionStore,
    metrics_for,
)
from delf_studio.llm_gateway import RecordingBackend, ScriptedBackend
from delf_studio.prompt_engine import PromptEngine, count_description_tokens
from delf_studio.sandbox_executor import ExecutionConfig, execute_candidate
from delf_studio.service.replay import replay_scenario

MODEL = "studio-default"
SCENARIOS_SUBDIR = Path("src/delf_studio/fixtures/scenarios")


# --------------------------------------------------------------------------
# Plumbing


@dataclass(frozen=True)
class Defect:
    """One planted bug. ``edits`` maps text of the fixed version to text of
    the broken version; applying them to version k+1 yields version k."""

    label: str
    edits: tuple[tuple[str, str], ...]
    stage: str
    check: str
    failure_class: str


@dataclass(frozen=True)
class ScenarioSpec:
    dirname: str
    name: str
    words: int
    description: str
    design_replies: tuple[str, ...]
    feedback: str | None
    final_source: str
    defects: tuple[Defect, ...]
    codify_preamble: str
    debug_preambles: tuple[str, ...]
    expected_kind: str
    expected_trials: int


def break_source(source: str, defect: Defect) -> str:
    for fixed, broken in defect.edits:
        if source.count(fixed) != 1:
            raise AssertionError(
                f"{defect.label}: anchor occurs {source.count(fixed)}x, need exactly 1:\n{fixed}"
            )
        source = source.replace(fixed, broken)
    return source


def build_versions(spec: ScenarioSpec) -> list[str]:
    """versions[k] carries defects k+1..N; the last entry is the final source."""
    versions = [spec.final_source]
    for defect in reversed(spec.defects):
        versions.insert(0, break_source(versions[0], defect))
    return versions


def code_reply(preamble: str, source: str) -> str:
    return f"{preamble}\n\n```python\n{source}```\n"


def build_replies(spec: ScenarioSpec) -> list[str]:
    versions = build_versions(spec)
    replies = [spec.design_replies[0]]
    if spec.feedback is not None:
        replies.append(spec.design_replies[1])
    replies.append(code_reply(spec.codify_preamble, versions[0]))
    if len(spec.debug_preambles) != len(spec.defects):
        raise AssertionError(f"{spec.dirname}: need one debug preamble per defect")
    for preamble, source in zip(spec.debug_preambles, versions[1:]):
        replies.append(code_reply(preamble, source))
    return replies


def build_steps(spec: ScenarioSpec) -> list[dict]:
    steps: list[dict] = [{"op": "propose"}]
    if spec.feedback is not None:
        steps.append({"op": "feedback", "text": spec.feedback})
        steps.append({"op": "propose"})
    steps += [{"op": "approve"}, {"op": "codify"}, {"op": "validate"}]
    return steps


def record_scenario(spec: ScenarioSpec, out_root: Path) -> dict:
    assert count_description_tokens(spec.description) == spec.words, spec.dirname
    steps = build_steps(spec)
    reports = []

    def capturing_executor(source: str, design_document: str, config: ExecutionConfig):
        report = execute_candidate(source, design_document, config)
        reports.append(report)
        return report

    with tempfile.TemporaryDirectory() as tmp:
        transcript_tmp = Path(tmp) / "transcript.jsonl"
        backend = RecordingBackend(
            ScriptedBackend(build_replies(spec), model=MODEL), transcript_tmp, MODEL
        )
        engine = SessionEngine(
            store=SessionStore(Path(tmp) / "store"),
            backend=backend,
            prompts=PromptEngine.load(),
            execution=ExecutionConfig(harness_command=(sys.executable, "-m", "envcheck")),
            executor=capturing_executor,
        )
        state = engine.create_session(spec.description)
        for step in steps:
            op = step["op"]
            if op == "propose":
                state = engine.propose_design(state.session_id)
            elif op == "feedback":
                state = engine.submit_feedback(state.session_id, step["text"])
            elif op == "approve":
                state = engine.approve_design(state.session_id)
            elif op == "codify":
                state = engine.codify(state.session_id)
            elif op == "validate":
                state = engine.validate(state.session_id)
            rejected = [
                e for e in state.events if e.kind in ("reply-rejected", "codify-rejected")
            ]
            assert not rejected, (spec.dirname, op, rejected[-1].detail)
        assert state.phase is Phase.EXECUTABLE, (spec.dirname, state.phase)

        metrics = metrics_for(state)
        assert metrics.description_tokens == spec.words, metrics
        assert metrics.space_kind is not None and metrics.space_kind.value == spec.expected_kind
        assert metrics.trials_to_execution == spec.expected_trials, metrics

        assert len(reports) == len(spec.defects) + 1, (spec.dirname, len(reports))
        for report, defect in zip(reports, spec.defects):
            failed = [f.check for f in report.findings if not f.passed]
            assert report.verdict == "fail", (spec.dirname, defect.label)
            assert report.stage == defect.stage, (
                spec.dirname,
                defect.label,
                report.stage,
                failed,
            )
            assert failed == [defect.check], (spec.dirname, defect.label, failed)
            assert report.failure_class is not None
            assert report.failure_class.value == defect.failure_class, (
                spec.dirname,
                defect.label,
                report.failure_class,
            )
        assert reports[-1].passed, spec.dirname

        scenario = {
            "schema_version": 1,
            "name": spec.name,
            "model": MODEL,
            "description_file": "description.txt",
            "transcript_file": "transcript.jsonl",
            "steps": steps,
            "validation_script": [
                {**r.to_dict(), "duration_seconds": 0.0} for r in reports
            ],
            "expected": {
                "space_kind": spec.expected_kind,
                "description_tokens": spec.words,
                "trials_to_execution": spec.expected_trials,
            },
        }

        target = out_root / spec.dirname
        if target.exists():
            shutil.rmtree(target)
        target.mkdir(parents=True)
        (target / "description.txt").write_text(spec.description, encoding="utf-8")
        shutil.copy(transcript_tmp, target / "transcript.jsonl")
        (target / "scenario.json").write_text(
            json.dumps(scenario, indent=2) + "\n", encoding="utf-8"
        )

    # Full round trip from the files just written.
    with tempfile.TemporaryDirectory() as tmp:
        result = replay_scenario(target, Path(tmp) / "store")
    row = {
        "environment": spec.name,
        "space_kind": spec.expected_kind,
        "description_tokens": spec.words,
        "trials_to_execution": spec.expected_trials,
    }
    assert result.metrics.trials_to_execution == spec.expected_trials
    return row


# --------------------------------------------------------------------------
# Key-Lock


KEYLOCK_DESCRIPTION = """\
An agent moves through a three by three grid world. One cell holds a key and \
another holds a locked door. The agent must first pick up the key and then \
walk to the door to unlock it. Unlocking the door ends the episode with a \
positive reward.
"""

KEYLOCK_FINAL = '''\
"""Key-lock gridworld: pick up the key, then open the lock."""

class Box:
    """Continuous space: closed per-dimension bounds, shape (dims,)."""

    def __init__(self, low, high):
        self.low = [float(v) for v in low]
        self.high = [float(v) for v in high]
        self.shape = (len(self.low),)

class Discrete:
    """Integer space: values 0 .. n-1."""

    def __init__(self, n):
        self.n = int(n)

class DictSpace:
    """Named sub-spaces in declaration order."""

    def __init__(self, spaces):
        self.spaces = dict(spaces)

GRID_SIZE = 3
KEY_CELL = (0, 2)
LOCK_CELL = (2, 2)
START_CELL = (0, 0)

# Action encoding: 0 north (y+1), 1 south (y-1), 2 east (x+1), 3 west (x-1).
MOVES = {0: (0, 1), 1: (0, -1), 2: (1, 0), 3: (-1, 0)}

class Environment:
    """Episodic environment for reinforcement learning.

    reset() returns the first observation of an episode. step(action) returns
    (observation, reward, terminated, truncated, info).
    """

    def __init__(self, seed=0):
        self.observation_space = DictSpace(
            {
                "agent_x": Discrete(GRID_SIZE),
                "agent_y": Discrete(GRID_SIZE),
                "has_key": Discrete(2),
            }
        )
        self.action_space = Discrete(4)
        self._seed = seed  # dynamics are deterministic; kept for the contract
        self._x, self._y = START_CELL
        self._has_key = 0
        self._steps = 0
        self._done = True

    def reset(self):
        self._x, self._y = START_CELL
        self._has_key = 0
        self._steps = 0
        self._done = False
        return self._observation()

    def _observation(self):
        return {"agent_x": self._x, "agent_y": self._y, "has_key": self._has_key}

    def step(self, action):
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        dx, dy = MOVES[int(action) % 4]
        self._x = min(max(self._x + dx, 0), GRID_SIZE - 1)
        self._y = min(max(self._y + dy, 0), GRID_SIZE - 1)
        if (self._x, self._y) == KEY_CELL:
            self._has_key = 1
        reward = 0.0
        terminated = False
        if self._has_key and (self._x, self._y) == LOCK_CELL:
            reward = 1.0
            terminated = True
        self._steps += 1
        truncated = not terminated and self._steps >= 100
        self._done = terminated or truncated
        return self._observation(), reward, terminated, truncated, {}
'''

KEYLOCK = ScenarioSpec(
    dirname="keylock",
    name="Key-Lock",
    words=48,
    description=KEYLOCK_DESCRIPTION,
    design_replies=(
        """The state that matters is the agent position plus key possession; I also \
expose whether the lock has been opened.

OBSERVATION:
agent_x | column of the agent in the grid | discrete{0,1,2}
agent_y | row of the agent in the grid | discrete{0,1,2}
has_key | whether the agent carries the key | discrete{0,1}
lock_open | whether the lock has been opened | discrete{0,1}
ACTION:
move | direction to step: north, south, east, west | discrete{0,1,2,3}
""",
        """Agreed, the flag is constant for the whole episode the agent ever sees. \
Removed it.

OBSERVATION:
agent_x | column of the agent in the grid | discrete{0,1,2}
agent_y | row of the agent in the grid | discrete{0,1,2}
has_key | whether the agent carries the key | discrete{0,1}
ACTION:
move | direction to step: north, south, east, west | discrete{0,1,2,3}
""",
    ),
    feedback=(
        "lock_open never varies while the agent can act: the episode ends the "
        "moment the lock opens. Drop lock_open and keep everything else as it is."
    ),
    final_source=KEYLOCK_FINAL,
    defects=(
        Defect(
            label="keylock: observation omits has_key",
            edits=(
                (
                    '                "agent_y": Discrete(GRID_SIZE),\n'
                    '                "has_key": Discrete(2),\n',
                    '                "agent_y": Discrete(GRID_SIZE),\n',
                ),
                (
                    'return {"agent_x": self._x, "agent_y": self._y, "has_key": self._has_key}',
                    'return {"agent_x": self._x, "agent_y": self._y}',
                ),
            ),
            stage="spaces",
            check="obs_space_matches",
            failure_class="ApiContractViolation",
        ),
    ),
    codify_preamble=(
        "Here is the environment. Movement clamps at the walls, the key is picked "
        "up on entering its cell, and opening the lock ends the episode."
    ),
    debug_preambles=(
        "The declared observation space dropped has_key even though the approved "
        "design lists it. Restored the key flag in both the space declaration and "
        "the observation dict.",
    ),
    expected_kind="Discrete",
    expected_trials=2,
)


# --------------------------------------------------------------------------
# Recommender System


RECOMMENDER_DESCRIPTION = """\
An online retail platform shows one recommended product to a shopper at every \
turn of a browsing session. The shopper is summarized by a dense profile \
vector capturing demographics and recent browsing activity, and by how \
intensely they have been buying from each product category lately. After \
every recommendation the shopper either buys the product or ignores it, and \
buying should become more likely when the suggestion matches both the profile \
and the recent purchases. Sessions end when the shopper leaves the site, \
which grows steadily more likely the longer the session runs. The goal is to \
maximize the number of purchases per session.
"""

RECOMMENDER_FINAL = '''\
"""Session-based product recommender with a deterministic shopper model."""

import random


class Box:
    """Continuous space: closed per-dimension bounds, shape (dims,)."""

    def __init__(self, low, high):
        self.low = [float(v) for v in low]
        self.high = [float(v) for v in high]
        self.shape = (len(self.low),)


class Discrete:
    """Integer space: values 0 .. n-1."""

    def __init__(self, n):
        self.n = int(n)


class DictSpace:
    """Named sub-spaces in declaration order."""

    def __init__(self, spaces):
        self.spaces = dict(spaces)


N_ITEMS = 20
N_CATEGORIES = 6
PROFILE_DIMS = 8
SESSION_LIMIT = 60


class Environment:
    """Episodic environment for reinforcement learning.

    reset() returns the first observation of an episode. step(action) returns
    (observation, reward, terminated, truncated, info).
    """

    def __init__(self, seed=0):
        low = [-1.0] * PROFILE_DIMS + [0.0] * N_CATEGORIES
        high = [1.0] * (PROFILE_DIMS + N_CATEGORIES)
        self.observation_space = Box(low, high)
        self.action_space = Discrete(N_ITEMS)
        self._rng = random.Random(seed)
        self._profile = [0.0] * PROFILE_DIMS
        self._history = [0.0] * N_CATEGORIES
        self._steps = 0
        self._done = True

    def reset(self):
        self._profile = [round(self._rng.uniform(-1.0, 1.0), 6) for _ in range(PROFILE_DIMS)]
        self._history = [0.0] * N_CATEGORIES
        self._steps = 0
        self._done = False
        return self._observation()

    def _observation(self):
        return list(self._profile) + list(self._history)

    def step(self, action):
        if self._done:
            raise RuntimeError("session is over; call reset()")
        item = int(action) % N_ITEMS
        category = item % N_CATEGORIES
        affinity = self._profile[category] + 0.5 * self._history[category]
        bought = affinity > self._rng.uniform(-1.0, 1.0)
        reward = 1.0 if bought else 0.0
        if bought:
            self._history[category] = min(1.0, self._history[category] + 0.25)
        else:
            self._history[category] = max(0.0, self._history[category] - 0.02)
        self._steps += 1
        terminated = self._rng.random() < 0.02 + 0.002 * self._steps
        truncated = not terminated and self._steps >= SESSION_LIMIT
        self._done = terminated or truncated
        return self._observation(), reward, terminated, truncated, {}
'''

RECOMMENDER = ScenarioSpec(
    dirname="recommender",
    name="Recommender System",
    words=104,
    description=RECOMMENDER_DESCRIPTION,
    design_replies=(
        """OBSERVATION:
user_profile | embedding of shopper demographics and recent browsing activity | continuous[-1.0,1.0]^8
ACTION:
recommend_item | index of the product shown to the shopper | discrete{0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19}
""",
        """Good point; the profile alone cannot separate those shoppers.

OBSERVATION:
user_profile | embedding of shopper demographics and recent browsing activity | continuous[-1.0,1.0]^8
purchase_history | recency-weighted purchase intensity per product category | continuous[0.0,1.0]^6
ACTION:
recommend_item | index of the product shown to the shopper | discrete{0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19}
""",
    ),
    feedback=(
        "Two shoppers with the same profile but different baskets look identical "
        "here. Add a purchase history signal: one recency-weighted intensity per "
        "product category, bounded between 0 and 1."
    ),
    final_source=RECOMMENDER_FINAL,
    defects=(
        Defect(
            label="recommender: basket share divides by zero",
            edits=(
                (
                    "        if bought:\n"
                    "            self._history[category] = self._history[category] + 0.25\n",
                    "        if bought:\n"
                    "            share = self._history[category] / sum(self._history)\n"
                    "            self._history[category] = (\n"
                    "                self._history[category] + 0.25 * (1.0 - share)\n"
                    "            )\n",
                ),
            ),
            stage="episodes",
            check="episode_ok",
            failure_class="RuntimeError",
        ),
        Defect(
            label="recommender: purchase intensity unbounded",
            edits=(
                (
                    "            self._history[category] = min(1.0, self._history[category] + 0.25)\n",
                    "            self._history[category] = self._history[category] + 0.25\n",
                ),
            ),
            stage="episodes",
            check="obs_in_bounds",
            failure_class="ApiContractViolation",
        ),
    ),
    codify_preamble=(
        "Implementation below. The shopper is a seeded stochastic model: purchase "
        "probability grows with profile affinity and recent category purchases, "
        "and sessions end stochastically or after sixty turns."
    ),
    debug_preambles=(
        "The basket share computation divides by the total purchase intensity, "
        "which is zero until the first purchase. Replaced the share-weighted "
        "update with a plain additive one.",
        "The category intensity grows without bound after repeated purchases, "
        "violating the declared [0, 1] range. Clamped the update at 1.0.",
    ),
    expected_kind="Hybrid",
    expected_trials=3,
)


# --------------------------------------------------------------------------
# Self-Driving Car


SELFDRIVING_DESCRIPTION = """\
A self-driving car travels along a straight multi-lane highway behind a \
slower lead vehicle. The car perceives its lateral offset from the lane \
center, its heading error relative to the lane direction, its own forward \
speed, and the remaining distance to the lead vehicle up to a fixed sensor \
range. It also sees the state of the next traffic signal ahead, which cycles \
through green, yellow, and red phases. At every control step the car chooses \
a steering rate and a longitudinal acceleration, both bounded by the vehicle \
dynamics. Drifting off the lane or rear-ending the lead vehicle ends the \
episode immediately with a penalty. The controller should hold the lane, \
respect the signal, and keep a safe following gap while maintaining speed, \
so the reward favors forward speed and penalizes lateral deviation and \
collisions.
"""

SELFDRIVING_FINAL = '''\
"""Highway driving behind a lead vehicle, with lane keeping and traffic lights."""

import math
import random


class Box:
    """Continuous space: closed per-dimension bounds, shape (dims,)."""

    def __init__(self, low, high):
        self.low = [float(v) for v in low]
        self.high = [float(v) for v in high]
        self.shape = (len(self.low),)


class Discrete:
    """Integer space: values 0 .. n-1."""

    def __init__(self, n):
        self.n = int(n)


class DictSpace:
    """Named sub-spaces in declaration order."""

    def __init__(self, spaces):
        self.spaces = dict(spaces)


MAX_OFFSET = 2.0
MAX_HEADING = 0.7854
MAX_SPEED = 30.0
SENSOR_RANGE = 100.0
LIGHT_PERIOD = 15
EPISODE_LIMIT = 120
DT = 0.1


class Environment:
    """Episodic environment for reinforcement learning.

    reset() returns the first observation of an episode. step(action) returns
    (observation, reward, terminated, truncated, info).
    """

    def __init__(self, seed=0):
        self.observation_space = DictSpace(
            {
                "lane_offset": Box([-MAX_OFFSET], [MAX_OFFSET]),
                "heading_error": Box([-MAX_HEADING], [MAX_HEADING]),
                "speed": Box([0.0], [MAX_SPEED]),
                "lead_distance": Box([0.0], [SENSOR_RANGE]),
                "traffic_light": Discrete(3),
            }
        )
        self.action_space = Box([-0.6, -3.0], [0.6, 2.0])
        self._rng = random.Random(seed)
        self._offset = 0.0
        self._heading = 0.0
        self._speed = 0.0
        self._lead_distance = SENSOR_RANGE
        self._lead_speed = 0.0
        self._steps = 0
        self._done = True

    def reset(self):
        self._offset = 0.0
        self._heading = 0.0
        self._speed = 10.0
        self._lead_distance = 50.0
        self._lead_speed = 8.0 + 4.0 * self._rng.random()
        self._steps = 0
        self._done = False
        return self._observation()

    def _observation(self):
        return {
            "lane_offset": [self._offset],
            "heading_error": [self._heading],
            "speed": [self._speed],
            "lead_distance": [self._lead_distance],
            "traffic_light": (self._steps // LIGHT_PERIOD) % 3,
        }

    def step(self, action):
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        steer = min(max(float(action[0]), -0.6), 0.6)
        accel = min(max(float(action[1]), -3.0), 2.0)
        self._heading = min(max(self._heading + steer * DT, -MAX_HEADING), MAX_HEADING)
        drift = math.sin(self._heading) * self._speed * DT
        self._offset = min(max(self._offset + drift, -MAX_OFFSET), MAX_OFFSET)
        self._speed = min(max(self._speed + accel * DT * 5.0, 0.0), MAX_SPEED)
        self._lead_speed = min(max(self._lead_speed + self._rng.uniform(-0.5, 0.5), 0.0), MAX_SPEED)
        gap = self._lead_distance + (self._lead_speed - self._speed) * DT
        self._lead_distance = min(max(gap, 0.0), SENSOR_RANGE)
        collided = self._lead_distance <= 0.0
        off_road = abs(self._offset) >= MAX_OFFSET
        reward = self._speed * 0.01 - abs(self._offset) * 0.05
        if collided or off_road:
            reward -= 1.0
        terminated = collided or off_road
        self._steps += 1
        truncated = not terminated and self._steps >= EPISODE_LIMIT
        self._done = terminated or truncated
        return self._observation(), reward, terminated, truncated, {}
'''

SELFDRIVING = ScenarioSpec(
    dirname="selfdriving",
    name="Self-Driving Car",
    words=135,
    description=SELFDRIVING_DESCRIPTION,
    design_replies=(
        """Mixing continuous kinematics with the discrete signal phase:

OBSERVATION:
lane_offset | lateral offset from the lane center in meters | continuous[-2.0,2.0]
heading_error | heading error relative to the lane direction in radians | continuous[-0.7854,0.7854]
speed | forward speed of the car in meters per second | continuous[0.0,30.0]
lead_distance | distance to the lead vehicle in meters, capped at sensor range | continuous[0.0,100.0]
traffic_light | state of the next signal: green, yellow, or red | discrete{0,1,2}
ACTION:
steer | steering rate command in radians per second | continuous[-0.6,0.6]
accel | longitudinal acceleration command in meters per second squared | continuous[-3.0,2.0]
""",
    ),
    feedback=None,
    final_source=SELFDRIVING_FINAL,
    defects=(
        Defect(
            label="selfdriving: unbalanced parenthesis",
            edits=(
                (
                    "        self._speed = min(max(self._speed + accel * DT * 5.0, 0.0), MAX_SPEED)\n",
                    "        self._speed = min(max(self._speed + accel * DT * 5.0, 0.0), MAX_SPEED\n",
                ),
            ),
            stage="load",
            check="load_ok",
            failure_class="SyntaxError",
        ),
        Defect(
            label="selfdriving: two-phase traffic light",
            edits=(
                (
                    '                "traffic_light": Discrete(3),\n',
                    '                "traffic_light": Discrete(2),\n',
                ),
            ),
            stage="spaces",
            check="obs_space_matches",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="selfdriving: lead spawns beyond sensor range",
            edits=(
                (
                    "        self._lead_distance = 50.0\n",
                    "        self._lead_distance = 140.0\n",
                ),
            ),
            stage="episodes",
            check="obs_in_bounds",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="selfdriving: four-element step return",
            edits=(
                (
                    "        return self._observation(), reward, terminated, truncated, {}\n",
                    "        return self._observation(), reward, terminated or truncated, {}\n",
                ),
            ),
            stage="episodes",
            check="step_arity",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="selfdriving: integer termination flag",
            edits=(
                (
                    "        terminated = collided or off_road\n",
                    "        terminated = 1 if collided or off_road else 0\n",
                ),
            ),
            stage="episodes",
            check="flags_boolean",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="selfdriving: compounding speed bonus overflows",
            edits=(
                (
                    "        self._steps = 0\n        self._done = False\n        return self._observation()\n",
                    "        self._steps = 0\n        self._speed_bonus = 2.0\n"
                    "        self._done = False\n        return self._observation()\n",
                ),
                (
                    "        reward = self._speed * 0.01 - abs(self._offset) * 0.05\n",
                    "        self._speed_bonus = self._speed_bonus * self._speed_bonus + 2.0\n"
                    "        reward = self._speed * 0.01 * self._speed_bonus - abs(self._offset) * 0.05\n",
                ),
            ),
            stage="episodes",
            check="reward_finite",
            failure_class="ApiContractViolation",
        ),
    ),
    codify_preamble=(
        "Kinematic lane model with a seeded lead vehicle. Steering integrates "
        "into heading, heading into lateral offset, and the signal cycles on a "
        "fixed period."
    ),
    debug_preambles=(
        "There was an unbalanced parenthesis in the speed update. Fixed.",
        "The signal has three phases but the space declared two. Widened "
        "traffic_light to Discrete(3).",
        "The lead vehicle spawned at 140 m, outside the declared 100 m sensor "
        "range. It now spawns inside the range.",
        "step() collapsed the two end-of-episode flags into one done value. "
        "Restored the five-element return.",
        "The termination flag was an int. Both flags are real booleans now.",
        "The compounding speed bonus squares itself every step and overflows "
        "within an episode. Removed the bonus; the reward is plain speed minus "
        "lateral deviation.",
    ),
    expected_kind="Hybrid",
    expected_trials=6,
)


# --------------------------------------------------------------------------
# Swimmer


SWIMMER_DESCRIPTION = """\
A planar robot swims through a viscous fluid. Its body is a chain of three \
rigid segments connected by two actuated joints. The robot senses the current \
angle of each joint, the heading of its leading segment, the angular \
velocities of the joints and of the leading segment, and the velocity of its \
center of mass in the plane. It applies a torque at each joint to bend its \
body and push against the surrounding fluid. The objective is to swim forward \
as fast as possible, so the reward is the forward progress achieved during \
each control step.
"""

SWIMMER_FINAL = '''\
"""Planar two-joint swimmer driven by joint torques."""

import math


class Box:
    """Continuous space: closed per-dimension bounds, shape (dims,)."""

    def __init__(self, low, high):
        self.low = [float(v) for v in low]
        self.high = [float(v) for v in high]
        self.shape = (len(self.low),)


class Discrete:
    """Integer space: values 0 .. n-1."""

    def __init__(self, n):
        self.n = int(n)


class DictSpace:
    """Named sub-spaces in declaration order."""

    def __init__(self, spaces):
        self.spaces = dict(spaces)


JOINT_LIMIT = 1.5708
HEADING_LIMIT = 3.1416
MAX_ANGULAR_VELOCITY = 8.0
MAX_COM_VELOCITY = 4.0
EPISODE_LIMIT = 150
DT = 0.05


def _clamp(value, low, high):
    return min(max(value, low), high)


class Environment:
    """Episodic environment for reinforcement learning.

    reset() returns the first observation of an episode. step(action) returns
    (observation, reward, terminated, truncated, info).
    """

    def __init__(self, seed=0):
        low = [-JOINT_LIMIT] * 2 + [-HEADING_LIMIT] + [-MAX_ANGULAR_VELOCITY] * 3
        low += [-MAX_COM_VELOCITY] * 2
        high = [-v for v in low]
        self.observation_space = Box(low, high)
        self.action_space = Box([-1.0, -1.0], [1.0, 1.0])
        self._seed = seed  # dynamics are deterministic; kept for the contract
        self._joints = [0.0, 0.0]
        self._joint_vel = [0.0, 0.0]
        self._heading = 0.0
        self._heading_vel = 0.0
        self._com_vel = [0.0, 0.0]
        self._steps = 0
        self._done = True

    def reset(self):
        self._joints = [0.1, -0.1]
        self._joint_vel = [0.0, 0.0]
        self._heading = 0.0
        self._heading_vel = 0.0
        self._com_vel = [0.0, 0.0]
        self._steps = 0
        self._done = False
        return self._observation()

    def _observation(self):
        return [
            self._joints[0],
            self._joints[1],
            self._heading,
            self._joint_vel[0],
            self._joint_vel[1],
            self._heading_vel,
            self._com_vel[0],
            self._com_vel[1],
        ]

    def step(self, action):
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        torques = [_clamp(float(action[i]), -1.0, 1.0) for i in range(2)]
        for i in range(2):
            # Torque works against a restoring spring and viscous drag.
            accel = torques[i] * 3.0 - self._joints[i] - 0.5 * self._joint_vel[i]
            self._joint_vel[i] = _clamp(
                self._joint_vel[i] + accel * DT,
                -MAX_ANGULAR_VELOCITY,
                MAX_ANGULAR_VELOCITY,
            )
            self._joints[i] = _clamp(
                self._joints[i] + self._joint_vel[i] * DT, -JOINT_LIMIT, JOINT_LIMIT
            )
        reaction = -(torques[0] + torques[1]) * 1.5
        self._heading_vel = _clamp(
            self._heading_vel + (reaction - 0.2 * self._heading_vel) * DT,
            -MAX_ANGULAR_VELOCITY,
            MAX_ANGULAR_VELOCITY,
        )
        raw_heading = self._heading + self._heading_vel * DT
        self._heading = math.atan2(math.sin(raw_heading), math.cos(raw_heading))
        thrust = abs(self._joint_vel[0] - self._joint_vel[1]) * 0.3
        self._com_vel[0] = _clamp(
            self._com_vel[0] * 0.95 + thrust * math.cos(self._heading) * DT,
            -MAX_COM_VELOCITY,
            MAX_COM_VELOCITY,
        )
        self._com_vel[1] = _clamp(
            self._com_vel[1] * 0.95 + thrust * math.sin(self._heading) * DT,
            -MAX_COM_VELOCITY,
            MAX_COM_VELOCITY,
        )
        reward = self._com_vel[0] * DT
        self._steps += 1
        terminated = False
        truncated = self._steps >= EPISODE_LIMIT
        self._done = truncated
        return self._observation(), reward, terminated, truncated, {}
'''

SWIMMER = ScenarioSpec(
    dirname="swimmer",
    name="Swimmer",
    words=98,
    description=SWIMMER_DESCRIPTION,
    design_replies=(
        """OBSERVATION:
joint_angles | angles of the two actuated body joints in radians | continuous[-1.5708,1.5708]^2
body_heading | heading of the leading segment in radians | continuous[-3.1416,3.1416]
angular_velocities | angular velocities of the joints and the leading segment | continuous[-8.0,8.0]^3
com_velocity | velocity of the center of mass in the plane | continuous[-4.0,4.0]^2
ACTION:
joint_torques | torque applied at each joint | continuous[-1.0,1.0]^2
""",
    ),
    feedback=None,
    final_source=SWIMMER_FINAL,
    defects=(
        Defect(
            label="swimmer: unclosed bracket in bounds",
            edits=(
                (
                    "        low += [-MAX_COM_VELOCITY] * 2\n",
                    "        low += [-MAX_COM_VELOCITY * 2\n",
                ),
            ),
            stage="load",
            check="load_ok",
            failure_class="SyntaxError",
        ),
        Defect(
            label="swimmer: leftover controller class",
            edits=(
                (
                    'class Environment:\n    """Episodic environment for reinforcement learning.\n',
                    "class Controller:\n"
                    '    """Torque PD helper retained from an earlier draft."""\n'
                    "\n"
                    "    def reset(self):\n"
                    "        self._last = [0.0, 0.0]\n"
                    "\n"
                    "    def step(self, error):\n"
                    "        self._last = error\n"
                    "        return [e * 0.5 for e in error]\n"
                    "\n"
                    "\n"
                    'class Environment:\n    """Episodic environment for reinforcement learning.\n',
                ),
            ),
            stage="instantiate",
            check="class_found",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: constructor demands n_links",
            edits=(
                (
                    "    def __init__(self, seed=0):\n",
                    "    def __init__(self, n_links, seed=0):\n",
                ),
            ),
            stage="instantiate",
            check="instantiate_ok",
            failure_class="RuntimeError",
        ),
        Defect(
            label="swimmer: three-torque action space",
            edits=(
                (
                    "        self.action_space = Box([-1.0, -1.0], [1.0, 1.0])\n",
                    "        self.action_space = Box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])\n",
                ),
            ),
            stage="spaces",
            check="act_space_matches",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: reset returns a pair",
            edits=(
                (
                    "        self._done = False\n        return self._observation()\n",
                    "        self._done = False\n        return self._observation(), {}\n",
                ),
            ),
            stage="episodes",
            check="reset_contract",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: angles reported in degrees",
            edits=(
                (
                    "        return [\n"
                    "            self._joints[0],\n"
                    "            self._joints[1],\n"
                    "            self._heading,\n",
                    "        return [\n"
                    "            math.degrees(self._joints[0]),\n"
                    "            math.degrees(self._joints[1]),\n"
                    "            math.degrees(self._heading),\n",
                ),
            ),
            stage="episodes",
            check="obs_in_bounds",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: squared reward scale overflows",
            edits=(
                (
                    "        self._joints = [0.1, -0.1]\n",
                    "        self._joints = [0.1, -0.1]\n        self._reward_scale = 2.0\n",
                ),
                (
                    "        reward = self._com_vel[0] * DT\n",
                    "        self._reward_scale = self._reward_scale * self._reward_scale + 2.0\n"
                    "        reward = self._com_vel[0] * DT * self._reward_scale\n",
                ),
            ),
            stage="episodes",
            check="reward_finite",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: steps continue past the end",
            edits=(
                (
                    '        if self._done:\n            raise RuntimeError("episode is over; call reset()")\n        torques',
                    "        torques",
                ),
                (
                    "        truncated = self._steps >= EPISODE_LIMIT\n",
                    "        truncated = self._steps == EPISODE_LIMIT\n",
                ),
            ),
            stage="episodes",
            check="no_step_after_terminal",
            failure_class="ApiContractViolation",
        ),
        Defect(
            label="swimmer: single-slot episode log",
            edits=(
                (
                    "        self._steps = 0\n        self._done = True\n",
                    "        self._steps = 0\n"
                    "        self._episode_index = -1\n"
                    "        self._episode_returns = [0.0]\n"
                    "        self._done = True\n",
                ),
                (
                    "        self._steps = 0\n        self._done = False\n",
                    "        self._steps = 0\n"
                    "        self._episode_index += 1\n"
                    "        self._episode_returns[self._episode_index] = 0.0\n"
                    "        self._done = False\n",
                ),
            ),
            stage="episodes",
            check="episode_ok",
            failure_class="RuntimeError",
        ),
    ),
    codify_preamble=(
        "Below is a torque-driven two-joint swimmer with viscous damping. Joint "
        "springs keep the angles bounded, the heading wraps, and thrust comes "
        "from differential joint speed."
    ),
    debug_preambles=(
        "An opening bracket in the bound list was never closed. Fixed the syntax.",
        "A leftover Controller helper also exposed reset and step, making the "
        "candidate ambiguous. Deleted it; only Environment remains.",
        "The constructor demanded an n_links argument the harness never passes. "
        "The signature is __init__(self, seed=0) again.",
        "The action space declared three torques for a two-joint body. It is "
        "two-dimensional now.",
        "reset() returned an (observation, info) pair instead of the bare "
        "observation. It returns the observation alone.",
        "The observation emitted angles in degrees while the declaration is in "
        "radians. Dropped the conversions.",
        "The reward scale squares itself each step and overflows. Removed the "
        "scaling; the reward is forward velocity times the step size.",
        "After an episode ended, step() kept going with both flags false. "
        "Restored the guard that raises once the episode is over, and truncation "
        "latches at the limit.",
        "The per-episode return log was sized for a single episode, so the "
        "second reset crashed. Dropped the log.",
    ),
    expected_kind="Continuous",
    expected_trials=9,
)


ALL_SPECS = (RECOMMENDER, SELFDRIVING, SWIMMER, KEYLOCK)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    default_out = Path(__file__).resolve().parents[1] / SCENARIOS_SUBDIR
    parser.add_argument("--out", type=Path, default=default_out)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [record_scenario(spec, args.out) for spec in ALL_SPECS]
    for row in rows:
        print(
            f"{row['environment']},{row['space_kind']},"
            f"{row['description_tokens']},{row['trials_to_execution']}"
        )
    print(f"wrote {len(rows)} scenario(s) under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
