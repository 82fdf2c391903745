"""Runs candidate environment code under an external harness, in a child process.

The executor never imports candidate code into its own interpreter. It writes
the candidate module and the design document into a scratch directory and
invokes a harness command::

    <harness...> <candidate.py> <design.json> --seed N --episodes N --max-steps N

The harness prints a JSON report on stdout and exits 0 (all checks passed),
1 (checks ran, at least one failed), or 2 (the harness itself broke). Exit 2
and unparseable stdout raise HarnessError; they are harness defects, not
candidate failures. Report shape::

    {"schema_version": 1, "verdict": "pass"|"fail", "stage": <str>,
     "checks": [{"name": str, "passed": bool, "detail": str}],
     "error": {"type": str, "message": str} | null}
"""

from __future__ import annotations

import json
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any


class FailureClass(str, Enum):
    TIMEOUT = "Timeout"
    SYNTAX_ERROR = "SyntaxError"
    API_CONTRACT_VIOLATION = "ApiContractViolation"
    RUNTIME_ERROR = "RuntimeError"


# Checks whose failure means the candidate broke the environment API contract
# rather than crashing. Exceptions inside candidate code surface as non-contract
# findings (instantiate_ok, episode_ok) or as the report's error object.
API_CONTRACT_CHECKS = frozenset(
    {
        "class_found",
        "obs_space_matches",
        "act_space_matches",
        "reset_contract",
        "step_arity",
        "obs_in_bounds",
        "reward_finite",
        "flags_boolean",
        "no_step_after_terminal",
    }
)


@dataclass(frozen=True)
class Finding:
    check: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    verdict: str  # "pass" | "fail"
    failure_class: FailureClass | None
    stage: str | None
    findings: tuple[Finding, ...]
    error_type: str | None
    error_message: str | None
    stderr_tail: str
    duration_seconds: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def failure_text(self) -> str:
        """Human-readable account of what went wrong, for debug prompts."""
        if self.passed:
            return ""
        parts: list[str] = []
        if self.failure_class is not None:
            parts.append(f"failure class: {self.failure_class.value}")
        if self.stage:
            parts.append(f"stage reached: {self.stage}")
        for f in self.findings:
            if not f.passed:
                line = f"check failed: {f.check}"
                if f.detail:
                    line += f" ({f.detail})"
                parts.append(line)
        if self.error_type:
            parts.append(f"error: {self.error_type}: {self.error_message or ''}".rstrip())
        if self.stderr_tail.strip():
            parts.append("stderr:\n" + self.stderr_tail.strip())
        return "\n".join(parts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "failure_class": self.failure_class.value if self.failure_class else None,
            "stage": self.stage,
            "findings": [
                {"check": f.check, "passed": f.passed, "detail": f.detail} for f in self.findings
            ],
            "error_type": self.error_type,
            "error_message": self.error_message,
            "stderr_tail": self.stderr_tail,
            "duration_seconds": self.duration_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ValidationReport":
        return cls(
            verdict=data["verdict"],
            failure_class=FailureClass(data["failure_class"]) if data.get("failure_class") else None,
            stage=data.get("stage"),
            findings=tuple(
                Finding(f["check"], f["passed"], f.get("detail", ""))
                for f in data.get("findings", [])
            ),
            error_type=data.get("error_type"),
            error_message=data.get("error_message"),
            stderr_tail=data.get("stderr_tail", ""),
            duration_seconds=data.get("duration_seconds", 0.0),
        )


@dataclass(frozen=True)
class ExecutionConfig:
    """How to launch the harness. The command is any argv prefix; nothing here
    assumes the candidate runtime is Python."""

    harness_command: tuple[str, ...]
    time_limit_seconds: float = 60.0
    episodes: int = 3
    max_steps: int = 200
    seed: int = 0
    extra_args: tuple[str, ...] = field(default=())


class HarnessError(RuntimeError):
    """The harness itself failed: exit code 2, missing report, or bad JSON."""


def classify_failure(
    timed_out: bool,
    stage: str | None,
    failed_checks: tuple[str, ...],
) -> FailureClass:
    """Single failure class per report, highest-precedence cause first:
    Timeout, then SyntaxError, then ApiContractViolation, then RuntimeError.
    SyntaxError exactly when the candidate never survived the load stage."""
    if timed_out:
        return FailureClass.TIMEOUT
    if stage == "load" or "load_ok" in failed_checks:
        return FailureClass.SYNTAX_ERROR
    if any(name in API_CONTRACT_CHECKS for name in failed_checks):
        return FailureClass.API_CONTRACT_VIOLATION
    return FailureClass.RUNTIME_ERROR


_TAIL_CHARS = 4000


def _tail(text: str) -> str:
    return text[-_TAIL_CHARS:]


def execute_candidate(
    source: str,
    design_document: str,
    config: ExecutionConfig,
    scratch_dir: Path | None = None,
) -> ValidationReport:
    """Write the candidate and design to disk, run the harness, classify.

    ``scratch_dir``: reuse a caller-owned directory (kept afterwards); default
    is a fresh temporary directory removed on return. The candidate source and
    design document are written byte-for-byte; the child process sees exactly
    what the caller holds.
    """
    if scratch_dir is not None:
        scratch_dir.mkdir(parents=True, exist_ok=True)
        return _run_in(scratch_dir, source, design_document, config)
    with tempfile.TemporaryDirectory(prefix="delf-sandbox-") as tmp:
        return _run_in(Path(tmp), source, design_document, config)


def _run_in(
    directory: Path, source: str, design_document: str, config: ExecutionConfig
) -> ValidationReport:
    candidate_path = directory / "candidate.py"
    design_path = directory / "design.json"
    candidate_path.write_text(source, encoding="utf-8")
    design_path.write_text(design_document, encoding="utf-8")
    argv = [
        *config.harness_command,
        str(candidate_path),
        str(design_path),
        "--seed",
        str(config.seed),
        "--episodes",
        str(config.episodes),
        "--max-steps",
        str(config.max_steps),
        *config.extra_args,
    ]
    started = time.monotonic()
    try:
        proc = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            timeout=config.time_limit_seconds,
            cwd=directory,
        )
    except subprocess.TimeoutExpired as exc:
        stderr = exc.stderr or b""
        if isinstance(stderr, bytes):
            stderr = stderr.decode("utf-8", "replace")
        return ValidationReport(
            verdict="fail",
            failure_class=FailureClass.TIMEOUT,
            stage=None,
            findings=(),
            error_type="Timeout",
            error_message=f"no verdict within {config.time_limit_seconds}s",
            stderr_tail=_tail(stderr),
            duration_seconds=time.monotonic() - started,
        )
    except FileNotFoundError as exc:
        raise HarnessError(f"harness command not found: {argv[0]}") from exc
    duration = time.monotonic() - started
    if proc.returncode == 2:
        raise HarnessError(f"harness internal error (exit 2): {_tail(proc.stderr)}")
    if proc.returncode not in (0, 1):
        raise HarnessError(
            f"unexpected harness exit code {proc.returncode}: {_tail(proc.stderr)}"
        )
    try:
        report = json.loads(proc.stdout)
    except json.JSONDecodeError as exc:
        raise HarnessError(f"harness stdout is not JSON: {exc}") from exc
    if not isinstance(report, dict) or report.get("verdict") not in ("pass", "fail"):
        raise HarnessError("harness report missing a pass/fail verdict")
    findings = tuple(
        Finding(str(c.get("name", "")), bool(c.get("passed")), str(c.get("detail", "")))
        for c in report.get("checks", [])
        if isinstance(c, dict)
    )
    verdict: str = report["verdict"]
    stage = report.get("stage")
    error = report.get("error") or None
    failure_class: FailureClass | None = None
    if verdict == "fail":
        failed = tuple(f.check for f in findings if not f.passed)
        failure_class = classify_failure(False, stage, failed)
    return ValidationReport(
        verdict=verdict,
        failure_class=failure_class,
        stage=stage,
        findings=findings,
        error_type=(error or {}).get("type"),
        error_message=(error or {}).get("message"),
        stderr_tail=_tail(proc.stderr),
        duration_seconds=duration,
    )
