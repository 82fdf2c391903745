"""Conformance harness as a child process: planted defects, exit codes, schema.

Each mutant plants exactly one defect in a known-good candidate module and
must be caught by exactly one named check. The harness is exercised the same
way the studio invokes it: a separate interpreter running ``-m envcheck``.
"""

from __future__ import annotations

import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

VETTED_SOURCE = '''\
"""Key-lock gridworld conforming to its design document."""


class Discrete:
    def __init__(self, n):
        self.n = n


class DictSpace:
    def __init__(self, spaces):
        self.spaces = spaces


class KeyLockEnv:
    def __init__(self, seed=0):
        self.observation_space = DictSpace({
            "agent_x": Discrete(3),
            "agent_y": Discrete(3),
            "has_key": Discrete(2),
        })
        self.action_space = Discrete(4)
        self._x = self._y = 0
        self._has_key = False
        self._t = 0
        self._done = True

    def _observation(self):
        return {"agent_x": self._x, "agent_y": self._y, "has_key": int(self._has_key)}

    def reset(self):
        self._x = self._y = 0
        self._has_key = False
        self._t = 0
        self._done = False
        return self._observation()

    def step(self, action):
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        moves = {0: (0, 1), 1: (0, -1), 2: (1, 0), 3: (-1, 0)}
        dx, dy = moves[int(action)]
        self._x = min(2, max(0, self._x + dx))
        self._y = min(2, max(0, self._y + dy))
        self._t += 1
        if (self._x, self._y) == (2, 2):
            self._has_key = True
        reward = 0.0
        terminated = False
        truncated = self._t >= 40
        if self._has_key and (self._x, self._y) == (0, 0):
            reward = 1.0
            terminated = True
        if terminated or truncated:
            self._done = True
        return self._observation(), reward, terminated, truncated, {}
'''

DESIGN = {
    "observation": {
        "kind": "composite",
        "entries": {
            "agent_x": {"kind": "discrete", "cardinality": 3},
            "agent_y": {"kind": "discrete", "cardinality": 3},
            "has_key": {"kind": "discrete", "cardinality": 2},
        },
    },
    "action": {"kind": "discrete", "cardinality": 4},
}

CHECK_ORDER = [
    "load_ok",
    "class_found",
    "instantiate_ok",
    "obs_space_matches",
    "act_space_matches",
    "reset_contract",
    "step_arity",
    "obs_in_bounds",
    "reward_finite",
    "flags_boolean",
    "no_step_after_terminal",
    "episode_ok",
]


def mutate(source: str, *edits: tuple[str, str]) -> str:
    """Apply anchored single-occurrence replacements; refuse silent no-ops."""
    for anchor, replacement in edits:
        assert source.count(anchor) == 1, f"anchor not unique: {anchor!r}"
        source = source.replace(anchor, replacement)
    return source


# One planted defect per entry: (label, edits, failing check, stage).
MUTANTS = [
    (
        "syntax error",
        [("    def reset(self):\n", "    def reset(self:\n")],
        "load_ok",
        "load",
    ),
    (
        "no environment class",
        [("    def step(self, action):\n", "    def walk(self, action):\n")],
        "class_found",
        "instantiate",
    ),
    (
        "constructor raises",
        [
            (
                "    def __init__(self, seed=0):\n",
                "    def __init__(self, seed=0):\n        raise RuntimeError('needs a config file')\n",
            )
        ],
        "instantiate_ok",
        "instantiate",
    ),
    (
        "observation space missing an entry",
        [('            "has_key": Discrete(2),\n', "")],
        "obs_space_matches",
        "spaces",
    ),
    (
        "action space cardinality off by one",
        [("self.action_space = Discrete(4)", "self.action_space = Discrete(5)")],
        "act_space_matches",
        "spaces",
    ),
    (
        "reset returns a tuple",
        [
            (
                "        return self._observation()\n",
                "        return self._observation(), {}\n",
            )
        ],
        "reset_contract",
        "episodes",
    ),
    (
        "step returns four values",
        [
            (
                "        return self._observation(), reward, terminated, truncated, {}\n",
                "        return self._observation(), reward, terminated or truncated, {}\n",
            )
        ],
        "step_arity",
        "episodes",
    ),
    (
        "observation leaves the declared range",
        [('"agent_x": self._x,', '"agent_x": self._x + 5,')],
        "obs_in_bounds",
        "episodes",
    ),
    (
        "non-finite reward",
        [("        reward = 0.0\n", '        reward = float("inf")\n')],
        "reward_finite",
        "episodes",
    ),
    (
        "termination flag is an int",
        [("        terminated = False\n", "        terminated = 0\n")],
        "flags_boolean",
        "episodes",
    ),
    (
        "keeps running after the episode ended",
        [
            (
                '        if self._done:\n            raise RuntimeError("episode is over; call reset()")\n',
                "        if self._done:\n            return self._observation(), 0.0, False, False, {}\n",
            )
        ],
        "no_step_after_terminal",
        "episodes",
    ),
    (
        "episode never ends",
        [
            ("        truncated = self._t >= 40\n", "        truncated = False\n"),
            ("            terminated = True\n", "            terminated = False\n"),
        ],
        "episode_ok",
        "episodes",
    ),
]


def run_envcheck(tmp_path: Path, source: str, design=DESIGN, *flags: str):
    candidate = tmp_path / "candidate.py"
    candidate.write_text(source, encoding="utf-8")
    design_path = tmp_path / "design.json"
    if isinstance(design, str):
        design_path.write_text(design, encoding="utf-8")
    else:
        design_path.write_text(json.dumps(design), encoding="utf-8")
    proc = subprocess.run(
        [sys.executable, "-m", "envcheck", str(candidate), str(design_path), *flags],
        capture_output=True,
        text=True,
        timeout=60,
    )
    report = json.loads(proc.stdout) if proc.stdout.strip() else None
    return proc, report


def report_schema() -> dict:
    text = resources.files("envcheck").joinpath("report.schema.json").read_text("utf-8")
    return json.loads(text)


class TestVettedCandidate:
    def test_passes_every_check(self, tmp_path):
        proc, report = run_envcheck(tmp_path, VETTED_SOURCE)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert report["verdict"] == "pass"
        assert report["stage"] == "done"
        assert report["error"] is None
        assert report["episodes_run"] == 3
        assert [c["name"] for c in report["checks"]] == CHECK_ORDER
        assert all(c["passed"] for c in report["checks"])

    def test_report_matches_schema(self, tmp_path):
        _, report = run_envcheck(tmp_path, VETTED_SOURCE)
        jsonschema.validate(report, report_schema())

    def test_deterministic_output(self, tmp_path):
        first, _ = run_envcheck(tmp_path, VETTED_SOURCE)
        second, _ = run_envcheck(tmp_path, VETTED_SOURCE)
        assert first.stdout == second.stdout


class TestPlantedDefects:
    @pytest.mark.parametrize(
        "label,edits,check,stage", MUTANTS, ids=[m[0].replace(" ", "-") for m in MUTANTS]
    )
    def test_mutant_fails_named_check(self, tmp_path, label, edits, check, stage):
        source = mutate(VETTED_SOURCE, *edits)
        flags = ("--max-steps", "30") if check == "episode_ok" else ()
        proc, report = run_envcheck(tmp_path, source, DESIGN, *flags)
        assert proc.returncode == 1, f"{label}: {proc.stdout}{proc.stderr}"
        assert report["verdict"] == "fail"
        assert report["stage"] == stage
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        assert failed == [check], f"{label}: failed checks {failed}"
        # the failing check ends the run, so it is always the last one listed
        assert report["checks"][-1]["name"] == check
        jsonschema.validate(report, report_schema())

    def test_mutant_reports_are_deterministic(self, tmp_path):
        source = mutate(VETTED_SOURCE, *MUTANTS[8][1])
        first, _ = run_envcheck(tmp_path, source)
        second, _ = run_envcheck(tmp_path, source)
        assert first.stdout == second.stdout

    def test_ambiguous_candidate_class(self, tmp_path):
        source = VETTED_SOURCE + (
            "\n\nclass Shadow:\n"
            "    def reset(self):\n"
            "        return 0\n"
            "    def step(self, action):\n"
            "        return (0, 0.0, True, False, {})\n"
        )
        proc, report = run_envcheck(tmp_path, source)
        assert proc.returncode == 1
        failed = [c for c in report["checks"] if not c["passed"]]
        assert failed[0]["name"] == "class_found"
        assert "ambiguous" in failed[0]["detail"]
        assert "KeyLockEnv" in failed[0]["detail"]
        assert "Shadow" in failed[0]["detail"]


class TestLegacyStep:
    def test_four_tuple_accepted_with_flag(self, tmp_path):
        source = mutate(VETTED_SOURCE, *MUTANTS[6][1])  # the 4-tuple mutant
        proc, report = run_envcheck(tmp_path, source, DESIGN, "--legacy-step")
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert report["verdict"] == "pass"

    def test_five_tuple_rejected_with_flag(self, tmp_path):
        proc, report = run_envcheck(tmp_path, VETTED_SOURCE, DESIGN, "--legacy-step")
        assert proc.returncode == 1
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        assert failed == ["step_arity"]
        assert "expected 4" in report["checks"][-1]["detail"]


class TestHarnessFaults:
    def test_unreadable_design_is_exit_2(self, tmp_path):
        proc, report = run_envcheck(tmp_path, VETTED_SOURCE, "{not json")
        assert proc.returncode == 2
        assert "envcheck:" in proc.stderr
        assert report["verdict"] == "fail"
        assert report["error"]["type"] == "HarnessFault"
        jsonschema.validate(report, report_schema())

    def test_design_must_be_an_object(self, tmp_path):
        proc, report = run_envcheck(tmp_path, VETTED_SOURCE, "[1, 2]")
        assert proc.returncode == 2
        assert "must be a JSON object" in report["error"]["message"]

    def test_unknown_space_kind(self, tmp_path):
        design = {"observation": {"kind": "spherical"}, "action": DESIGN["action"]}
        proc, report = run_envcheck(tmp_path, VETTED_SOURCE, design)
        assert proc.returncode == 2
        assert "unknown space kind" in report["error"]["message"]

    def test_missing_candidate_file(self, tmp_path):
        design_path = tmp_path / "design.json"
        design_path.write_text(json.dumps(DESIGN), encoding="utf-8")
        proc = subprocess.run(
            [sys.executable, "-m", "envcheck", str(tmp_path / "absent.py"), str(design_path)],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert proc.returncode == 2
        report = json.loads(proc.stdout)
        assert report["error"]["type"] == "HarnessFault"

    def test_candidate_errors_never_fault_the_harness(self, tmp_path):
        # a candidate that raises at import time is a finding, not exit 2
        proc, report = run_envcheck(tmp_path, "raise SystemExit(3)\n")
        assert proc.returncode == 1
        assert report["checks"][0] == {
            "name": "load_ok",
            "passed": False,
            "detail": "SystemExit: 3",
        }
