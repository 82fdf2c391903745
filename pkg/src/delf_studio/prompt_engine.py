"""Builds the model queries: design, revision, codify, debug.

Templates are plain text files with a single line ``---`` separating the
system part from the user part, and ``{{name}}`` placeholders. Substitution is
single-pass: placeholders are resolved against the template only, and any
``{{`` / ``}}`` inside an inserted value is spaced out so a value can never
introduce or counterfeit a placeholder. A rendered prompt therefore never
contains the placeholder pattern.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .chat import ChatMessage, Conversation, Role
from .design_schema import DesignChoice, require_valid
from .response_parser import format_design_pair
from .sandbox_executor import ValidationReport

TEMPLATE_NAMES = ("design", "codify", "revision", "debug")
TEMPLATES_ENV_VAR = "DELF_TEMPLATES"
MAX_FAILURE_TEXT_CHARS = 4000

_PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")
_SEPARATOR = "---"

_REQUIRED_PLACEHOLDERS: dict[str, frozenset[str]] = {
    "design": frozenset({"description"}),
    "codify": frozenset({"design", "api_template", "rules_section"}),
    "revision": frozenset({"design", "feedback"}),
    "debug": frozenset({"source", "failure_text", "feedback_section"}),
}


class TemplateError(ValueError):
    """A template file is missing, malformed, or incomplete."""


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system: str
    user: str

    @property
    def placeholders(self) -> frozenset[str]:
        found = _PLACEHOLDER_RE.findall(self.system) + _PLACEHOLDER_RE.findall(self.user)
        return frozenset(found)


@dataclass(frozen=True)
class RenderedPrompt:
    """A complete, self-contained query: one system turn, one user turn.

    Carries its template name and the placeholder bindings that produced it,
    for auditability."""

    system: str
    user: str
    template_name: str = ""
    bindings: tuple[tuple[str, str], ...] = ()

    def to_conversation(self) -> Conversation:
        return Conversation(
            (ChatMessage(Role.SYSTEM, self.system), ChatMessage(Role.USER, self.user))
        )


def parse_template(name: str, text: str) -> PromptTemplate:
    lines = text.replace("\r\n", "\n").split("\n")
    try:
        cut = lines.index(_SEPARATOR)
    except ValueError:
        raise TemplateError(
            f"template {name!r} has no '---' line separating system and user parts"
        ) from None
    system = "\n".join(lines[:cut]).strip()
    user = "\n".join(lines[cut + 1 :]).strip()
    if not system or not user:
        raise TemplateError(f"template {name!r} has an empty system or user part")
    template = PromptTemplate(name, system, user)
    missing = _REQUIRED_PLACEHOLDERS.get(name, frozenset()) - template.placeholders
    if missing:
        raise TemplateError(
            f"template {name!r} lacks required placeholder(s): {', '.join(sorted(missing))}"
        )
    return template


def load_templates(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Resolution order: explicit directory, then $DELF_TEMPLATES, then the
    copies bundled with the package."""
    if directory is None:
        directory = os.environ.get(TEMPLATES_ENV_VAR) or None
    templates: dict[str, PromptTemplate] = {}
    for name in TEMPLATE_NAMES:
        if directory is None:
            ref = resources.files("delf_studio").joinpath(f"templates/{name}.tmpl")
            try:
                text = ref.read_text("utf-8")
            except FileNotFoundError:
                raise TemplateError(f"bundled template {name}.tmpl is missing") from None
        else:
            path = Path(directory) / f"{name}.tmpl"
            if not path.is_file():
                raise TemplateError(f"template file not found: {path}")
            text = path.read_text("utf-8")
        templates[name] = parse_template(name, text)
    return templates


def escape_braces(value: str) -> str:
    """Space out doubled braces so inserted text cannot form a placeholder."""
    return value.replace("{{", "{ {").replace("}}", "} }")


def render(template: PromptTemplate, values: Mapping[str, str]) -> RenderedPrompt:
    def substitute(text: str) -> str:
        def repl(match: re.Match[str]) -> str:
            key = match.group(1)
            if key not in values:
                raise TemplateError(
                    f"template {template.name!r} uses {{{{{key}}}}} but no value was given"
                )
            return escape_braces(values[key])

        return _PLACEHOLDER_RE.sub(repl, text)

    return RenderedPrompt(
        system=substitute(template.system),
        user=substitute(template.user),
        template_name=template.name,
        bindings=tuple(sorted(values.items())),
    )


def truncate_failure_text(text: str, limit: int = MAX_FAILURE_TEXT_CHARS) -> str:
    """Cap harness output fed into debug prompts; the tail carries the
    traceback, so truncation drops the front."""
    if len(text) <= limit:
        return text
    marker = "[earlier output truncated]\n"
    return marker + text[-(limit - len(marker)) :]


def count_description_tokens(text: str) -> int:
    """Whitespace-delimited word count; the complexity measure for task
    descriptions."""
    return len(text.split())


class PromptEngine:
    def __init__(self, templates: Mapping[str, PromptTemplate]):
        missing = set(TEMPLATE_NAMES) - set(templates)
        if missing:
            raise TemplateError(f"missing template(s): {', '.join(sorted(missing))}")
        self._templates = dict(templates)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptEngine":
        return cls(load_templates(directory))

    def template(self, name: str) -> PromptTemplate:
        return self._templates[name]

    def render_design_query(self, description: str) -> RenderedPrompt:
        if not description.strip():
            raise ValueError("task description must not be empty")
        return render(self._templates["design"], {"description": description})

    def render_revision_query(
        self, observation: DesignChoice, action: DesignChoice, feedback: str
    ) -> RenderedPrompt:
        if not feedback.strip():
            raise ValueError("revision feedback must not be empty")
        require_valid(observation)
        require_valid(action)
        return render(
            self._templates["revision"],
            {"design": format_design_pair(observation, action), "feedback": feedback},
        )

    def render_codify_query(
        self,
        observation: DesignChoice,
        action: DesignChoice,
        api_template: str,
        coding_rules: tuple[str, ...] = (),
    ) -> RenderedPrompt:
        if not api_template.strip():
            raise ValueError("codify queries need a non-empty code structure template")
        require_valid(observation)
        require_valid(action)
        if coding_rules:
            rules_section = (
                "Coding rules:\n" + "\n".join(f"- {rule}" for rule in coding_rules) + "\n\n"
            )
        else:
            rules_section = ""
        return render(
            self._templates["codify"],
            {
                "design": format_design_pair(observation, action),
                "api_template": api_template,
                "rules_section": rules_section,
            },
        )

    def render_debug_query(
        self, source: str, report: ValidationReport, feedback: str | None = None
    ) -> RenderedPrompt:
        if report.passed:
            raise ValueError("debug queries are only rendered for failed reports")
        if feedback and feedback.strip():
            feedback_section = f"The user adds this hint:\n\n{feedback.strip()}\n\n"
        else:
            feedback_section = ""
        return render(
            self._templates["debug"],
            {
                "source": source,
                "failure_text": truncate_failure_text(report.failure_text()),
                "feedback_section": feedback_section,
            },
        )
