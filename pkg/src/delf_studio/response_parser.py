"""Turns raw model replies into design choices or code candidates.

The design-reply layout is two labeled sections, one pipe-delimited line per
attribute::

    OBSERVATION:
    name | description | quantification
    ACTION:
    name | description | quantification

with quantifications written as ``continuous[l,u]``, ``continuous[l,u]^n``,
or ``discrete{v1,v2,...}``. See docs/design_reply_grammar.md for the EBNF.

Everything here is pure and total: classify() maps arbitrary text to exactly
one reply kind and never raises.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .design_schema import (
    Attribute,
    ComponentKind,
    ContinuousQuant,
    DesignChoice,
    DiscreteQuant,
    Quantification,
    validate,
)


class ReplyKind(str, Enum):
    DESIGN = "design"
    CODE = "code"
    REFUSAL = "refusal"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class CodeCandidate:
    """One fenced block: the exact interior, newline-normalized to LF."""

    language_tag: str
    source: str
    block_index: int


class DesignReplyError(ValueError):
    """Base for design-reply parse failures; line numbers are 1-based."""


class MissingSection(DesignReplyError):
    def __init__(self, section: str):
        self.section = section
        super().__init__(f"design reply has no {section.upper()}: section")


class MalformedDesign(DesignReplyError):
    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {reason}: {line!r}")


# --------------------------------------------------------------------------
# Fenced code blocks


def extract_code_blocks(text: str) -> list[CodeCandidate]:
    """Every complete triple-backtick block, in order.

    An opening fence is a line starting with ``` (anything after the ticks is
    the language tag); the block closes at the next line that is exactly ```
    apart from surrounding whitespace. An unterminated final fence yields no
    block. Nested fences are not recognized.
    """
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    blocks: list[CodeCandidate] = []
    interior: list[str] | None = None
    tag = ""
    for line in normalized.split("\n"):
        stripped = line.strip()
        if interior is None:
            if stripped.startswith("```"):
                tag = stripped[3:].strip()
                interior = []
        elif stripped == "```":
            blocks.append(CodeCandidate(tag, "\n".join(interior), len(blocks)))
            interior = None
        else:
            interior.append(line)
    return blocks


def pick_code_candidate(text: str) -> CodeCandidate | None:
    """The candidate among a reply's blocks: longest source, ties to the first."""
    blocks = extract_code_blocks(text)
    if not blocks:
        return None
    return max(blocks, key=lambda b: (len(b.source), -b.block_index))


# --------------------------------------------------------------------------
# Design replies

_CONTINUOUS_RE = re.compile(
    r"^continuous\[\s*(?P<lower>[^,\]]+)\s*,\s*(?P<upper>[^,\]]+)\s*\]\s*(?:\^\s*(?P<dims>\d+))?$"
)
_DISCRETE_RE = re.compile(r"^discrete\{(?P<values>[^}]*)\}$")
_OBS_HEADER = re.compile(r"^OBSERVATION:\s*$")
_ACT_HEADER = re.compile(r"^ACTION:\s*$")


def parse_quantification(text: str) -> Quantification:
    """Parse one quantification term; raises ValueError on anything else."""
    term = text.strip()
    m = _CONTINUOUS_RE.match(term)
    if m:
        try:
            lower = float(m.group("lower"))
            upper = float(m.group("upper"))
        except ValueError:
            raise ValueError(f"non-numeric bound in {term!r}") from None
        dims = int(m.group("dims")) if m.group("dims") else 1
        return ContinuousQuant(lower, upper, dims)
    m = _DISCRETE_RE.match(term)
    if m:
        body = m.group("values").strip()
        if not body:
            raise ValueError("discrete set must not be empty")
        try:
            values = tuple(int(v.strip()) for v in body.split(","))
        except ValueError:
            raise ValueError(f"non-integer value in {term!r}") from None
        return DiscreteQuant(values)
    raise ValueError(f"unrecognized quantification {term!r}")


def format_quantification(q: Quantification) -> str:
    if isinstance(q, ContinuousQuant):
        base = f"continuous[{q.lower!r},{q.upper!r}]"
        return base if q.dims == 1 else f"{base}^{q.dims}"
    return "discrete{" + ",".join(str(v) for v in q.values) + "}"


def format_design_pair(obs: DesignChoice, act: DesignChoice) -> str:
    """Render a design pair into the reply layout; parse_design_reply inverts this.

    Inversion holds when names and descriptions contain no '|' or newlines
    (the layout's own delimiters); the JSON document codec has no such limits.
    """
    lines = ["OBSERVATION:"]
    for a in obs.attributes:
        lines.append(f"{a.name} | {a.description} | {format_quantification(a.quantification)}")
    lines.append("ACTION:")
    for a in act.attributes:
        lines.append(f"{a.name} | {a.description} | {format_quantification(a.quantification)}")
    return "\n".join(lines) + "\n"


def parse_design_reply(text: str) -> tuple[DesignChoice, DesignChoice]:
    """Parse the two-section layout into valid (observation, action) choices.

    Prose before the first section header is tolerated (models preface their
    answers); every nonblank line after a header must be an attribute line.
    """
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    sections: dict[ComponentKind, list[Attribute]] = {}
    current: ComponentKind | None = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if _OBS_HEADER.match(line):
            if ComponentKind.OBSERVATION in sections:
                raise MalformedDesign(i, raw, "duplicate OBSERVATION section")
            current = ComponentKind.OBSERVATION
            sections[current] = []
            continue
        if _ACT_HEADER.match(line):
            if ComponentKind.ACTION in sections:
                raise MalformedDesign(i, raw, "duplicate ACTION section")
            current = ComponentKind.ACTION
            sections[current] = []
            continue
        if current is None or not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise MalformedDesign(i, raw, "expected 'name | description | quantification'")
        name, description, quant_text = parts
        try:
            quant = parse_quantification(quant_text)
        except ValueError as exc:
            raise MalformedDesign(i, raw, str(exc)) from None
        sections[current].append(Attribute(name, description, quant))
    for kind in (ComponentKind.OBSERVATION, ComponentKind.ACTION):
        if kind not in sections:
            raise MissingSection(kind.value)
    obs = DesignChoice(ComponentKind.OBSERVATION, tuple(sections[ComponentKind.OBSERVATION]))
    act = DesignChoice(ComponentKind.ACTION, tuple(sections[ComponentKind.ACTION]))
    for choice in (obs, act):
        violations = validate(choice)
        if violations:
            first = violations[0]
            raise MalformedDesign(
                0, "", f"{choice.component_kind.value} design invalid: "
                f"{(first.attribute + ': ') if first.attribute else ''}{first.reason}"
            )
    return obs, act


# --------------------------------------------------------------------------
# Classification

_DEFAULT_REFUSAL_PHRASES = (
    "i cannot",
    "i can't",
    "i can not",
    "i'm sorry",
    "i am sorry",
    "i apologize",
    "i won't",
    "i will not",
    "i'm unable",
    "i am unable",
    "as an ai",
    "cannot help with",
    "can't help with",
    "cannot assist",
)


def load_refusal_lexicon(path: Path | None = None) -> tuple[str, ...]:
    """Case-insensitive refusal phrases: one per line, '#' comments, blank lines skipped."""
    if path is None:
        text = resources.files("delf_studio").joinpath("data/refusal_phrases.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    phrases = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line.lower())
    return tuple(phrases) or _DEFAULT_REFUSAL_PHRASES


def classify(text: str, refusal_lexicon: tuple[str, ...] = _DEFAULT_REFUSAL_PHRASES) -> ReplyKind:
    """Total classification: Design, else Code, else Refusal, else Malformed."""
    try:
        parse_design_reply(text)
        return ReplyKind.DESIGN
    except DesignReplyError:
        pass
    if extract_code_blocks(text):
        return ReplyKind.CODE
    lowered = text.lower()
    if any(phrase in lowered for phrase in refusal_lexicon):
        return ReplyKind.REFUSAL
    return ReplyKind.MALFORMED
