"""Formal sufficiency/necessity analysis of observation and action designs on
small explicit MDPs. Pure computation; no model calls."""

from .mdp import (
    InvalidMdp,
    MdpFixture,
    ObservationProjection,
    TabularMdp,
    identity_projection,
    load_mdp_fixture,
    mdp_fixture_from_dict,
    mdp_fixture_to_dict,
    optimal_return,
    restrict_actions,
    save_mdp_fixture,
    value_iteration,
)
from .sufficiency import (
    ActionNecessityVerdict,
    ActionSufficiencyVerdict,
    BudgetExceeded,
    ObservationNecessityVerdict,
    SufficiencyVerdict,
    best_reactive_return,
    is_necessary_action,
    is_necessary_observation,
    is_sufficient,
    is_sufficient_action,
    meets_threshold,
)
from .keylock import generate_keylock

__all__ = [
    "ActionNecessityVerdict",
    "ActionSufficiencyVerdict",
    "BudgetExceeded",
    "InvalidMdp",
    "MdpFixture",
    "ObservationNecessityVerdict",
    "ObservationProjection",
    "SufficiencyVerdict",
    "TabularMdp",
    "best_reactive_return",
    "generate_keylock",
    "identity_projection",
    "is_necessary_action",
    "is_necessary_observation",
    "is_sufficient",
    "is_sufficient_action",
    "load_mdp_fixture",
    "mdp_fixture_from_dict",
    "mdp_fixture_to_dict",
    "meets_threshold",
    "optimal_return",
    "restrict_actions",
    "save_mdp_fixture",
    "value_iteration",
]
