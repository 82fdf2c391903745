"""Design-choice vocabulary: attributes, quantifications, space declarations.

A design choice fixes how one RL component (observation or action) is
represented: an ordered list of named attributes, each bound to a numeric
quantification — a bounded continuous box or an explicit finite integer set.
This module validates design choices, classifies observation/action pairs
by space kind, lowers choices to abstract space declarations, serializes
them to the versioned JSON document format, and diffs revisions.

Attribute order is significant everywhere: vector layouts derived from a
choice must be deterministic so the conformance harness can compare shapes.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

SCHEMA_VERSION = 1

_NAME_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class ComponentKind(str, Enum):
    OBSERVATION = "observation"
    ACTION = "action"


class SpaceKind(str, Enum):
    CONTINUOUS = "Continuous"
    DISCRETE = "Discrete"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class ContinuousQuant:
    """A box [lower, upper]^dims with finite bounds, uniform per attribute."""

    lower: float
    upper: float
    dims: int = 1


@dataclass(frozen=True)
class DiscreteQuant:
    """An explicit, strictly increasing list of admissible integer values."""

    values: tuple[int, ...]


Quantification = Union[ContinuousQuant, DiscreteQuant]


@dataclass(frozen=True)
class Attribute:
    name: str
    description: str
    quantification: Quantification


@dataclass(frozen=True)
class DesignChoice:
    component_kind: ComponentKind
    attributes: tuple[Attribute, ...]


@dataclass(frozen=True)
class Violation:
    """One violated invariant, attributed to the offending attribute when there is one."""

    attribute: str | None
    reason: str


class InvalidDesignChoice(ValueError):
    """Raised by operations whose precondition requires a valid choice."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        detail = "; ".join(
            f"{v.attribute + ': ' if v.attribute else ''}{v.reason}" for v in violations
        )
        super().__init__(f"invalid design choice: {detail}")


class DesignDocumentError(ValueError):
    """A design-choice document failed to parse; carries a field/line location."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{message}{' (at ' + location + ')' if location else ''}")


# --------------------------------------------------------------------------
# Validation


def validate(choice: DesignChoice) -> list[Violation]:
    """Check every invariant; an empty list means the choice is valid.

    Violations are data, not faults: callers that require validity raise
    InvalidDesignChoice themselves via require_valid().
    """
    violations: list[Violation] = []
    if not isinstance(choice.component_kind, ComponentKind):
        violations.append(Violation(None, "component_kind must be observation or action"))
    if not choice.attributes:
        violations.append(Violation(None, "design choice must have at least one attribute"))
    seen: set[str] = set()
    for attr in choice.attributes:
        name = attr.name
        label = name if isinstance(name, str) and name else None
        if not isinstance(name, str) or not _NAME_PATTERN.match(name):
            violations.append(
                Violation(label, f"name {name!r} must match [A-Za-z][A-Za-z0-9_]*")
            )
        elif name in seen:
            violations.append(Violation(name, "duplicate attribute name"))
        else:
            seen.add(name)
        violations.extend(_validate_quant(label, attr.quantification))
    return violations


def _validate_quant(attr_name: str | None, quant: Any) -> list[Violation]:
    out: list[Violation] = []
    if isinstance(quant, ContinuousQuant):
        if not (isinstance(quant.lower, (int, float)) and isinstance(quant.upper, (int, float))):
            out.append(Violation(attr_name, "continuous bounds must be numbers"))
            return out
        if not (math.isfinite(quant.lower) and math.isfinite(quant.upper)):
            out.append(Violation(attr_name, "continuous bounds must be finite"))
        elif not quant.lower < quant.upper:
            out.append(Violation(attr_name, "lower must be strictly below upper"))
        if not (isinstance(quant.dims, int) and not isinstance(quant.dims, bool) and quant.dims >= 1):
            out.append(Violation(attr_name, "dims must be an integer >= 1"))
    elif isinstance(quant, DiscreteQuant):
        values = quant.values
        if not values:
            out.append(Violation(attr_name, "discrete values must be nonempty"))
            return out
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
            out.append(Violation(attr_name, "discrete values must be integers"))
            return out
        if any(b <= a for a, b in zip(values, values[1:])):
            out.append(Violation(attr_name, "discrete values must be strictly increasing"))
    else:
        out.append(Violation(attr_name, f"unknown quantification {type(quant).__name__}"))
    return out


def require_valid(choice: DesignChoice) -> DesignChoice:
    violations = validate(choice)
    if violations:
        raise InvalidDesignChoice(violations)
    return choice


# --------------------------------------------------------------------------
# Space classification and lowering


def classify_spaces(obs: DesignChoice, act: DesignChoice) -> SpaceKind:
    """Classify the observation/action pair by the quantification kinds it uses.

    Discrete iff every quantification in both choices is discrete, Continuous
    iff every one is continuous, Hybrid otherwise. Depends only on the multiset
    of kinds, so it is symmetric in which component carries the mix.
    """
    require_valid(obs)
    require_valid(act)
    quants = [a.quantification for c in (obs, act) for a in c.attributes]
    if all(isinstance(q, DiscreteQuant) for q in quants):
        return SpaceKind.DISCRETE
    if all(isinstance(q, ContinuousQuant) for q in quants):
        return SpaceKind.CONTINUOUS
    return SpaceKind.HYBRID


@dataclass(frozen=True)
class BoxDecl:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    dims: int

    @property
    def total_dims(self) -> int:
        return self.dims


@dataclass(frozen=True)
class DiscreteDecl:
    cardinality: int

    @property
    def total_dims(self) -> int:
        return 1


@dataclass(frozen=True)
class CompositeDecl:
    entries: tuple[tuple[str, "SpaceDecl"], ...]

    @property
    def total_dims(self) -> int:
        return sum(decl.total_dims for _, decl in self.entries)


SpaceDecl = Union[BoxDecl, DiscreteDecl, CompositeDecl]


def _attr_decl(attr: Attribute) -> SpaceDecl:
    q = attr.quantification
    if isinstance(q, ContinuousQuant):
        return BoxDecl((float(q.lower),) * q.dims, (float(q.upper),) * q.dims, q.dims)
    return DiscreteDecl(len(q.values))


def to_space_decl(choice: DesignChoice) -> SpaceDecl:
    """Lower a valid choice to a space declaration, deterministic in attribute order.

    All-continuous choices concatenate into one box; a single discrete
    attribute becomes a bare discrete declaration; anything else (mixed kinds,
    or several discrete attributes) becomes a composite keyed by attribute name.
    """
    require_valid(choice)
    attrs = choice.attributes
    if all(isinstance(a.quantification, ContinuousQuant) for a in attrs):
        lower: list[float] = []
        upper: list[float] = []
        for a in attrs:
            q = a.quantification
            assert isinstance(q, ContinuousQuant)
            lower.extend([float(q.lower)] * q.dims)
            upper.extend([float(q.upper)] * q.dims)
        return BoxDecl(tuple(lower), tuple(upper), len(lower))
    if len(attrs) == 1 and isinstance(attrs[0].quantification, DiscreteQuant):
        return DiscreteDecl(len(attrs[0].quantification.values))
    return CompositeDecl(tuple((a.name, _attr_decl(a)) for a in attrs))


def space_decl_to_dict(decl: SpaceDecl) -> dict[str, Any]:
    if isinstance(decl, BoxDecl):
        return {"kind": "box", "lower": list(decl.lower), "upper": list(decl.upper), "dims": decl.dims}
    if isinstance(decl, DiscreteDecl):
        return {"kind": "discrete", "cardinality": decl.cardinality}
    return {"kind": "composite", "entries": {name: space_decl_to_dict(d) for name, d in decl.entries}}


def space_decl_from_dict(doc: dict[str, Any]) -> SpaceDecl:
    kind = doc.get("kind")
    if kind == "box":
        lower = tuple(float(v) for v in doc["lower"])
        upper = tuple(float(v) for v in doc["upper"])
        return BoxDecl(lower, upper, int(doc["dims"]))
    if kind == "discrete":
        return DiscreteDecl(int(doc["cardinality"]))
    if kind == "composite":
        return CompositeDecl(
            tuple((name, space_decl_from_dict(d)) for name, d in doc["entries"].items())
        )
    raise DesignDocumentError(f"unknown space declaration kind {kind!r}", "kind")


# --------------------------------------------------------------------------
# Document encoding


def _quant_to_dict(q: Quantification) -> dict[str, Any]:
    if isinstance(q, ContinuousQuant):
        return {"kind": "continuous", "lower": q.lower, "upper": q.upper, "dims": q.dims}
    return {"kind": "discrete", "values": list(q.values)}


def to_document(choice: DesignChoice) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "component_kind": choice.component_kind.value,
        "attributes": [
            {
                "name": a.name,
                "description": a.description,
                "quantification": _quant_to_dict(a.quantification),
            }
            for a in choice.attributes
        ],
    }


def encode(choice: DesignChoice) -> str:
    """Serialize a valid choice to the UTF-8 JSON document format."""
    require_valid(choice)
    return json.dumps(to_document(choice), indent=2) + "\n"


def _expect(doc: Any, key: str, kind: type, where: str) -> Any:
    if not isinstance(doc, dict):
        raise DesignDocumentError("expected a JSON object", where)
    if key not in doc:
        raise DesignDocumentError(f"missing {key!r} key", where)
    value = doc[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DesignDocumentError(f"{key!r} must be a number", where)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DesignDocumentError(f"{key!r} must be an integer", where)
        return value
    if not isinstance(value, kind):
        raise DesignDocumentError(f"{key!r} must be {kind.__name__}", where)
    return value


def from_document(doc: Any) -> DesignChoice:
    version = _expect(doc, "schema_version", int, "top level")
    if version != SCHEMA_VERSION:
        raise DesignDocumentError(f"unsupported schema_version {version}", "schema_version")
    kind_str = _expect(doc, "component_kind", str, "top level")
    try:
        component = ComponentKind(kind_str)
    except ValueError:
        raise DesignDocumentError(f"unknown component_kind {kind_str!r}", "component_kind") from None
    raw_attrs = _expect(doc, "attributes", list, "top level")
    attrs: list[Attribute] = []
    for i, raw in enumerate(raw_attrs):
        where = f"attributes[{i}]"
        name = _expect(raw, "name", str, where)
        description = _expect(raw, "description", str, where)
        q_doc = _expect(raw, "quantification", dict, where)
        q_kind = _expect(q_doc, "kind", str, f"{where}.quantification")
        if q_kind == "continuous":
            quant: Quantification = ContinuousQuant(
                lower=_expect(q_doc, "lower", float, f"{where}.quantification"),
                upper=_expect(q_doc, "upper", float, f"{where}.quantification"),
                dims=_expect(q_doc, "dims", int, f"{where}.quantification"),
            )
        elif q_kind == "discrete":
            values = _expect(q_doc, "values", list, f"{where}.quantification")
            for v in values:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise DesignDocumentError(
                        "discrete values must be integers", f"{where}.quantification.values"
                    )
            quant = DiscreteQuant(tuple(values))
        else:
            raise DesignDocumentError(
                f"unknown quantification kind {q_kind!r}", f"{where}.quantification.kind"
            )
        attrs.append(Attribute(name, description, quant))
    choice = DesignChoice(component, tuple(attrs))
    violations = validate(choice)
    if violations:
        raise DesignDocumentError(
            "document decodes to an invalid design choice: "
            + "; ".join(f"{v.attribute or '-'}: {v.reason}" for v in violations),
            "attributes",
        )
    return choice


def decode(text: str) -> DesignChoice:
    """Parse the JSON document format back into a valid DesignChoice."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DesignDocumentError(f"not valid JSON: {exc.msg}", f"line {exc.lineno}") from None
    return from_document(doc)


# --------------------------------------------------------------------------
# Diffing


@dataclass(frozen=True)
class DesignDiff:
    """Attribute-level difference between two choices of the same component kind."""

    added: tuple[Attribute, ...] = ()
    removed: tuple[str, ...] = ()
    requantified: tuple[Attribute, ...] = field(default=())
    redescribed: tuple[Attribute, ...] = field(default=())

    @property
    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.requantified or self.redescribed)


class ComponentKindMismatch(ValueError):
    pass


def diff(a: DesignChoice, b: DesignChoice) -> DesignDiff:
    """Describe how to turn a into b. diff(a, a) is empty; apply_diff(a, diff(a, b)) == b."""
    require_valid(a)
    require_valid(b)
    if a.component_kind is not b.component_kind:
        raise ComponentKindMismatch(
            f"cannot diff {a.component_kind.value} against {b.component_kind.value}"
        )
    a_by_name = {attr.name: attr for attr in a.attributes}
    b_by_name = {attr.name: attr for attr in b.attributes}
    added = tuple(attr for attr in b.attributes if attr.name not in a_by_name)
    removed = tuple(attr.name for attr in a.attributes if attr.name not in b_by_name)
    requantified = tuple(
        attr
        for attr in b.attributes
        if attr.name in a_by_name and a_by_name[attr.name].quantification != attr.quantification
    )
    redescribed = tuple(
        attr
        for attr in b.attributes
        if attr.name in a_by_name
        and a_by_name[attr.name].quantification == attr.quantification
        and a_by_name[attr.name].description != attr.description
    )
    return DesignDiff(added, removed, requantified, redescribed)


def apply_diff(a: DesignChoice, d: DesignDiff) -> DesignChoice:
    """Apply a diff produced by diff(a, b); kept-attribute order follows a, additions append.

    Reproduces b up to attribute order when b reordered existing attributes;
    diff() never encodes pure reordering.
    """
    removed = set(d.removed)
    replacements = {attr.name: attr for attr in d.requantified + d.redescribed}
    kept = [
        replacements.get(attr.name, attr)
        for attr in a.attributes
        if attr.name not in removed
    ]
    return DesignChoice(a.component_kind, tuple(kept) + d.added)
