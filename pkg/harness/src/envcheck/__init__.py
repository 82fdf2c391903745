"""envcheck: execution-contract conformance checker for environment candidates."""

from .checker import (
    CHECK_CATALOG,
    REPORT_SCHEMA_VERSION,
    STAGES,
    CheckResult,
    ConformanceReport,
    run_conformance,
)
from .spaces import (
    BOUND_TOLERANCE,
    BoxSpec,
    CompositeSpec,
    DesignError,
    DiscreteSpec,
    check_member,
    match_space,
    parse_space,
    sample_action,
)

__version__ = "0.1.0"

__all__ = [
    "BOUND_TOLERANCE",
    "CHECK_CATALOG",
    "REPORT_SCHEMA_VERSION",
    "STAGES",
    "BoxSpec",
    "CheckResult",
    "CompositeSpec",
    "ConformanceReport",
    "DesignError",
    "DiscreteSpec",
    "check_member",
    "match_space",
    "parse_space",
    "run_conformance",
    "sample_action",
]
