"""Runs one candidate module against its design document and reports findings.

Stages run strictly in order: load, instantiate, spaces, episodes. The first
failing check ends the run; the report's stage names where it stopped ("done"
means every stage completed). Checks performed so far are always listed, so a
failing report shows what already passed.

Check details never embed filesystem paths, memory addresses, or timings:
reports for the same candidate, design, and seed are byte-identical, which
downstream tooling relies on when it replays recorded workflows.

Candidate code runs in this interpreter; isolation (process boundary, time
limit) is the caller's job. Exceptions raised by candidate code are findings,
never harness crashes.
"""

from __future__ import annotations

import json
import math
import numbers
import random
from dataclasses import dataclass, field
from typing import Any, Mapping

from .spaces import (
    BoxSpec,
    CompositeSpec,
    DesignError,
    DiscreteSpec,
    check_member,
    match_space,
    parse_space,
    sample_action,
)

REPORT_SCHEMA_VERSION = 1

CHECK_CATALOG = (
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
)

STAGES = ("load", "instantiate", "spaces", "episodes", "done")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    verdict: str  # "pass" | "fail"
    stage: str
    checks: tuple[CheckResult, ...]
    error: Mapping[str, str] | None
    seed: int
    episodes_run: int

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "verdict": self.verdict,
            "stage": self.stage,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks
            ],
            "error": dict(self.error) if self.error else None,
            "seed": self.seed,
            "episodes_run": self.episodes_run,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


class _CheckFailed(Exception):
    """Internal control flow: the run stops at the first failed check."""

    def __init__(self, stage: str, error: Mapping[str, str] | None = None):
        self.stage = stage
        self.error = error
        super().__init__(stage)


@dataclass
class _Run:
    seed: int
    episodes_run: int = 0
    checks: list[CheckResult] = field(default_factory=list)

    def ok(self, name: str, detail: str = "") -> None:
        self.checks.append(CheckResult(name, True, detail))

    def fail(self, stage: str, name: str, detail: str, exc: BaseException | None = None) -> None:
        self.checks.append(CheckResult(name, False, detail))
        error = {"type": type(exc).__name__, "message": str(exc)} if exc is not None else None
        raise _CheckFailed(stage, error)

    def report(self, verdict: str, stage: str, error: Mapping[str, str] | None = None) -> ConformanceReport:
        return ConformanceReport(
            verdict=verdict,
            stage=stage,
            checks=tuple(self.checks),
            error=error,
            seed=self.seed,
            episodes_run=self.episodes_run,
        )


def _describe(exc: BaseException) -> str:
    text = str(exc)
    return f"{type(exc).__name__}: {text}" if text else type(exc).__name__


def _guard(exc: BaseException) -> None:
    # Candidate code may raise anything; only interrupts abort the harness.
    if isinstance(exc, KeyboardInterrupt):
        raise exc


def run_conformance(
    source: str,
    design: Mapping[str, Any],
    seed: int = 0,
    episodes: int = 3,
    max_steps: int = 200,
    legacy_step: bool = False,
) -> ConformanceReport:
    """Check one candidate module (source text) against a parsed design document."""
    obs_spec = parse_space(design.get("observation"), "observation")
    act_spec = parse_space(design.get("action"), "action")
    run = _Run(seed=seed)
    try:
        env = _load_and_instantiate(run, source, seed)
        _check_spaces(run, env, obs_spec, act_spec)
        _run_episodes(run, env, obs_spec, act_spec, seed, episodes, max_steps, legacy_step)
    except _CheckFailed as failed:
        return run.report("fail", failed.stage, failed.error)
    return run.report("pass", "done")


def _load_and_instantiate(run: _Run, source: str, seed: int) -> Any:
    namespace: dict[str, Any] = {"__name__": "candidate"}
    try:
        # Compile under a fixed name so errors read the same on every machine.
        exec(compile(source, "candidate.py", "exec"), namespace)
    except BaseException as exc:
        _guard(exc)
        run.fail("load", "load_ok", _describe(exc), exc)
    run.ok("load_ok")

    found: list[tuple[str, type]] = []
    seen: set[int] = set()
    for name in sorted(namespace):
        obj = namespace[name]
        if not isinstance(obj, type) or id(obj) in seen:
            continue
        if callable(getattr(obj, "reset", None)) and callable(getattr(obj, "step", None)):
            found.append((name, obj))
            seen.add(id(obj))
    if not found:
        run.fail("instantiate", "class_found", "no class exposes both reset() and step()")
    if len(found) > 1:
        names = ", ".join(name for name, _ in found)
        run.fail(
            "instantiate",
            "class_found",
            f"ambiguous candidate: {len(found)} classes expose reset() and step(): {names}",
        )
    class_name, cls = found[0]
    run.ok("class_found", class_name)

    try:
        env = cls(seed=seed)
    except BaseException as exc:
        _guard(exc)
        run.fail("instantiate", "instantiate_ok", _describe(exc), exc)
    run.ok("instantiate_ok")
    return env


def _check_spaces(run: _Run, env: Any, obs_spec: Any, act_spec: Any) -> None:
    mismatch = match_space(getattr(env, "observation_space", None), obs_spec)
    if mismatch:
        run.fail("spaces", "obs_space_matches", mismatch)
    run.ok("obs_space_matches")
    mismatch = match_space(getattr(env, "action_space", None), act_spec)
    if mismatch:
        run.fail("spaces", "act_space_matches", mismatch)
    run.ok("act_space_matches")


def _step_result(
    run: _Run, result: Any, where: str, legacy_step: bool
) -> tuple[Any, Any, Any, Any, Any]:
    arity = 4 if legacy_step else 5
    if not isinstance(result, tuple):
        run.fail(
            "episodes",
            "step_arity",
            f"{where}: step returned {type(result).__name__}, expected a {arity}-tuple",
        )
    if len(result) != arity:
        run.fail(
            "episodes",
            "step_arity",
            f"{where}: step returned {len(result)} values, expected {arity}",
        )
    if legacy_step:
        obs, reward, done, info = result
        terminated, truncated = done, False
    else:
        obs, reward, terminated, truncated, info = result
    if not isinstance(info, dict):
        run.fail(
            "episodes",
            "step_arity",
            f"{where}: info (last element) has type {type(info).__name__}, expected dict",
        )
    return obs, reward, terminated, truncated, info


def _check_reward(run: _Run, reward: Any, where: str) -> None:
    if isinstance(reward, bool) or not isinstance(reward, numbers.Real):
        run.fail(
            "episodes",
            "reward_finite",
            f"{where}: reward has type {type(reward).__name__}, expected a finite real",
        )
    value = float(reward)
    if math.isnan(value) or math.isinf(value):
        run.fail("episodes", "reward_finite", f"{where}: reward is {value!r}")


def _check_flags(run: _Run, terminated: Any, truncated: Any, where: str, legacy_step: bool) -> None:
    label = "done" if legacy_step else "terminated"
    if type(terminated) is not bool:
        run.fail(
            "episodes",
            "flags_boolean",
            f"{where}: {label} has type {type(terminated).__name__}, expected bool",
        )
    if not legacy_step and type(truncated) is not bool:
        run.fail(
            "episodes",
            "flags_boolean",
            f"{where}: truncated has type {type(truncated).__name__}, expected bool",
        )


def _probe_after_end(run: _Run, env: Any, act_spec: Any, rng: random.Random, where: str, legacy_step: bool) -> None:
    """One extra step after the episode ended: the environment must refuse
    (raise) or keep reporting the episode as over. Silently continuing is the
    failure this check exists for."""
    try:
        result = env.step(sample_action(act_spec, rng))
    except BaseException as exc:
        _guard(exc)
        run.ok("no_step_after_terminal")
        return
    still_over = False
    if isinstance(result, tuple):
        if legacy_step and len(result) == 4:
            still_over = bool(result[2])
        elif not legacy_step and len(result) == 5:
            still_over = bool(result[2]) or bool(result[3])
    if not still_over:
        run.fail(
            "episodes",
            "no_step_after_terminal",
            f"{where}: step after the episode ended reports it still running",
        )
    run.ok("no_step_after_terminal")


def _run_episodes(
    run: _Run,
    env: Any,
    obs_spec: Any,
    act_spec: Any,
    seed: int,
    episodes: int,
    max_steps: int,
    legacy_step: bool,
) -> None:
    rng = random.Random(seed)
    reset_checked = step_checked = reward_checked = flags_checked = bounds_checked = False
    probe_done = False
    for episode in range(episodes):
        try:
            obs = env.reset()
        except BaseException as exc:
            _guard(exc)
            run.fail("episodes", "episode_ok", f"episode {episode}: reset raised {_describe(exc)}", exc)
        if isinstance(obs, tuple):
            run.fail(
                "episodes",
                "reset_contract",
                f"episode {episode}: reset() returned a tuple, expected a bare observation",
            )
        if obs is None:
            run.fail("episodes", "reset_contract", f"episode {episode}: reset() returned None")
        if not reset_checked:
            run.ok("reset_contract")
            reset_checked = True
        problem = check_member(obs, obs_spec)
        if problem:
            run.fail("episodes", "obs_in_bounds", f"episode {episode} reset: {problem}")

        ended = False
        for t in range(max_steps):
            where = f"episode {episode} step {t}"
            action = sample_action(act_spec, rng)
            try:
                result = env.step(action)
            except BaseException as exc:
                _guard(exc)
                run.fail("episodes", "episode_ok", f"{where}: step raised {_describe(exc)}", exc)
            obs, reward, terminated, truncated, info = _step_result(run, result, where, legacy_step)
            if not step_checked:
                run.ok("step_arity")
                step_checked = True
            problem = check_member(obs, obs_spec)
            if problem:
                run.fail("episodes", "obs_in_bounds", f"{where}: {problem}")
            if not bounds_checked:
                run.ok("obs_in_bounds")
                bounds_checked = True
            _check_reward(run, reward, where)
            if not reward_checked:
                run.ok("reward_finite")
                reward_checked = True
            _check_flags(run, terminated, truncated, where, legacy_step)
            if not flags_checked:
                run.ok("flags_boolean")
                flags_checked = True
            if terminated or truncated:
                ended = True
                if not probe_done:
                    _probe_after_end(run, env, act_spec, rng, where, legacy_step)
                    probe_done = True
                break
        if not ended:
            run.fail(
                "episodes",
                "episode_ok",
                f"episode {episode}: no termination or truncation within {max_steps} steps",
            )
        run.episodes_run += 1
    run.ok("episode_ok")


def harness_fault_report(message: str, seed: int) -> ConformanceReport:
    """Best-effort report emitted when the harness itself cannot run."""
    return ConformanceReport(
        verdict="fail",
        stage="load",
        checks=(),
        error={"type": "HarnessFault", "message": message},
        seed=seed,
        episodes_run=0,
    )
