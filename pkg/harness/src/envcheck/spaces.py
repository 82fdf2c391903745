"""Design-document spaces: parsing, structural matching, membership, sampling.

The design document is JSON with three space shapes::

    {"kind": "box", "lower": [...], "upper": [...], "dims": n}
    {"kind": "discrete", "cardinality": n}
    {"kind": "composite", "entries": {name: <space>, ...}}

Candidate spaces are matched by duck typing, never by class identity: box-like
means low/high sequences, discrete-like means an integer n, composite-like
means a spaces mapping. Numeric comparisons use an absolute tolerance so a
bound written 3.1416 matches one computed from pi rounded the same way.
"""

from __future__ import annotations

import math
import numbers
import random
from dataclasses import dataclass
from typing import Any, Mapping

BOUND_TOLERANCE = 1e-9


class DesignError(ValueError):
    """The design document itself is malformed; a harness fault, not a finding."""


@dataclass(frozen=True)
class BoxSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    @property
    def dims(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class DiscreteSpec:
    cardinality: int


@dataclass(frozen=True)
class CompositeSpec:
    entries: tuple[tuple[str, "SpaceSpec"], ...]


SpaceSpec = "BoxSpec | DiscreteSpec | CompositeSpec"


def parse_space(doc: Any, where: str) -> BoxSpec | DiscreteSpec | CompositeSpec:
    if not isinstance(doc, Mapping):
        raise DesignError(f"{where}: space must be an object, got {type(doc).__name__}")
    kind = doc.get("kind")
    if kind == "box":
        try:
            lower = tuple(float(v) for v in doc["lower"])
            upper = tuple(float(v) for v in doc["upper"])
            dims = int(doc["dims"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignError(f"{where}: bad box declaration: {exc}") from exc
        if len(lower) != dims or len(upper) != dims or dims < 1:
            raise DesignError(f"{where}: box bounds must both have length dims={dims}")
        if any(l > u for l, u in zip(lower, upper)):
            raise DesignError(f"{where}: box lower bound exceeds upper bound")
        return BoxSpec(lower, upper)
    if kind == "discrete":
        try:
            cardinality = int(doc["cardinality"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignError(f"{where}: bad discrete declaration: {exc}") from exc
        if cardinality < 1:
            raise DesignError(f"{where}: discrete cardinality must be positive")
        return DiscreteSpec(cardinality)
    if kind == "composite":
        entries = doc.get("entries")
        if not isinstance(entries, Mapping) or not entries:
            raise DesignError(f"{where}: composite needs a nonempty 'entries' object")
        return CompositeSpec(
            tuple((str(name), parse_space(sub, f"{where}.{name}")) for name, sub in entries.items())
        )
    raise DesignError(f"{where}: unknown space kind {kind!r}")


# ---------------------------------------------------------------------------
# Structural matching of declared candidate spaces


def _structure_name(space: Any) -> str:
    if space is None:
        return "nothing (attribute missing or None)"
    has_low = hasattr(space, "low") and hasattr(space, "high")
    if has_low:
        return "a box-like space"
    if hasattr(space, "n"):
        return "a discrete-like space"
    if hasattr(space, "spaces"):
        return "a composite-like space"
    return f"an object of type {type(space).__name__}"


def _as_float_list(value: Any) -> list[float] | None:
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        return None


def match_space(space: Any, spec: BoxSpec | DiscreteSpec | CompositeSpec) -> str | None:
    """None when the declared space structurally matches the design; otherwise
    a deterministic, path-free description of the first mismatch."""
    if isinstance(spec, BoxSpec):
        if not (hasattr(space, "low") and hasattr(space, "high")):
            return f"design requires a box, candidate declares {_structure_name(space)}"
        low = _as_float_list(space.low)
        high = _as_float_list(space.high)
        if low is None or high is None:
            return "box low/high are not numeric sequences"
        if len(low) != spec.dims or len(high) != spec.dims:
            return f"box has {len(low)} dims, design requires {spec.dims}"
        for i, (have, want) in enumerate(zip(low, spec.lower)):
            if abs(have - want) > BOUND_TOLERANCE:
                return f"box lower bound differs at dim {i}: {have!r} != {want!r}"
        for i, (have, want) in enumerate(zip(high, spec.upper)):
            if abs(have - want) > BOUND_TOLERANCE:
                return f"box upper bound differs at dim {i}: {have!r} != {want!r}"
        return None
    if isinstance(spec, DiscreteSpec):
        if not hasattr(space, "n"):
            return f"design requires a discrete space, candidate declares {_structure_name(space)}"
        try:
            n = int(space.n)
        except (TypeError, ValueError):
            return "discrete n is not an integer"
        if n != spec.cardinality:
            return f"discrete space has n={n}, design requires {spec.cardinality}"
        return None
    if not hasattr(space, "spaces"):
        return f"design requires a composite space, candidate declares {_structure_name(space)}"
    try:
        declared = dict(space.spaces)
    except (TypeError, ValueError):
        return "composite spaces attribute is not a mapping"
    want_names = [name for name, _ in spec.entries]
    if sorted(declared) != sorted(want_names):
        return (
            f"composite entries [{', '.join(sorted(str(k) for k in declared))}] "
            f"!= design entries [{', '.join(sorted(want_names))}]"
        )
    for name, sub_spec in spec.entries:
        mismatch = match_space(declared[name], sub_spec)
        if mismatch:
            return f"entry '{name}': {mismatch}"
    return None


# ---------------------------------------------------------------------------
# Observation membership


def _is_real(value: Any) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _is_integral(value: Any) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def check_member(value: Any, spec: BoxSpec | DiscreteSpec | CompositeSpec) -> str | None:
    """None when the value lies inside the design space; otherwise the first
    violation, phrased deterministically."""
    if isinstance(spec, BoxSpec):
        if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
            return f"observation has type {type(value).__name__}, expected a sequence of {spec.dims} floats"
        items = list(value)
        if len(items) != spec.dims:
            return f"observation has {len(items)} values, expected {spec.dims}"
        for i, item in enumerate(items):
            if not _is_real(item):
                return f"observation[{i}] has type {type(item).__name__}, expected a real number"
            x = float(item)
            if math.isnan(x) or math.isinf(x):
                return f"observation[{i}] is {x!r}"
            if x < spec.lower[i] - BOUND_TOLERANCE:
                return f"observation[{i}] = {x!r} is below lower bound {spec.lower[i]!r}"
            if x > spec.upper[i] + BOUND_TOLERANCE:
                return f"observation[{i}] = {x!r} exceeds upper bound {spec.upper[i]!r}"
        return None
    if isinstance(spec, DiscreteSpec):
        if not _is_integral(value):
            return f"observation has type {type(value).__name__}, expected an integer"
        v = int(value)
        if not 0 <= v < spec.cardinality:
            return f"observation = {v} outside range 0..{spec.cardinality - 1}"
        return None
    if not isinstance(value, Mapping):
        return f"observation has type {type(value).__name__}, expected a dict"
    want_names = [name for name, _ in spec.entries]
    if sorted(str(k) for k in value) != sorted(want_names):
        return (
            f"observation keys [{', '.join(sorted(str(k) for k in value))}] "
            f"!= design entries [{', '.join(sorted(want_names))}]"
        )
    for name, sub_spec in spec.entries:
        problem = check_member(value[name], sub_spec)
        if problem:
            return f"entry '{name}': {problem}"
    return None


# ---------------------------------------------------------------------------
# Action sampling (from the design, which is the source of truth)


def sample_action(spec: BoxSpec | DiscreteSpec | CompositeSpec, rng: random.Random) -> Any:
    if isinstance(spec, BoxSpec):
        return [rng.uniform(l, u) for l, u in zip(spec.lower, spec.upper)]
    if isinstance(spec, DiscreteSpec):
        return rng.randrange(spec.cardinality)
    return {name: sample_action(sub, rng) for name, sub in spec.entries}
