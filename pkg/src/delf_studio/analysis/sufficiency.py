"""Sufficiency and necessity of observation and action designs.

An observation projection is sufficient when the best return achievable by a
policy that sees only the projected observation comes within a relative slack
delta of the unrestricted optimum. The reactive policy class is deterministic
and memoryless; stochastic reactive policies are deliberately excluded so the
search stays finite and exact (this is conservative: a projection judged
insufficient here might still admit a stochastic near-optimal policy).

Two evaluation routes, always computing the same quantity:

- If states sharing an observation have identical reward rows and identical
  class-aggregated transition rows (and agree on terminality), the projection
  induces a well-defined aggregated MDP. Value iteration on it optimizes over
  step-indexed policies, which on a finite horizon can strictly beat every
  memoryless policy, so the shortcut is only taken when some single action per
  observation is greedy at every sweep; that choice attains the value-iteration
  optimum while staying memoryless, making the shortcut exact for the
  memoryless class too.
- Otherwise every deterministic observation policy is enumerated and evaluated
  exactly, batched through numpy. Beyond the policy budget this raises
  BudgetExceeded rather than approximating.

The threshold is computed as optimal - delta*|optimal| rather than the raw
product (1-delta)*optimal; the two coincide whenever the optimum is
nonnegative, and the former keeps "identity projection is sufficient" true
for negative optima as well.

Action sufficiency restricts the action set and compares against the
full-action optimum; necessity means sufficient while every single-element
removal is insufficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import islice, product
from typing import Any, Sequence

import numpy as np

from .mdp import ObservationProjection, TabularMdp, restrict_actions, value_iteration

DEFAULT_DELTA = 0.05
DEFAULT_BUDGET = 10_000_000
_AGG_ATOL = 1e-12
_VALUE_ATOL = 1e-12

METHOD_AGGREGATED = "aggregated-value-iteration"
METHOD_ENUMERATED = "exhaustive-enumeration"
METHOD_RESTRICTED = "restricted-value-iteration"


class BudgetExceeded(RuntimeError):
    def __init__(self, needed: int, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"exhaustive search needs {needed} policy evaluations, budget is {budget}"
        )


WitnessPolicy = tuple[tuple[tuple[Any, ...], str], ...]  # (observation symbol, action label)


@dataclass(frozen=True)
class SufficiencyVerdict:
    sufficient: bool
    optimal_return: float
    best_reactive_return: float
    witness_policy: WitnessPolicy | None  # present iff sufficient
    method: str
    delta: float


@dataclass(frozen=True)
class ObservationNecessityVerdict:
    necessary: bool
    base: SufficiencyVerdict
    removals: tuple[tuple[str, SufficiencyVerdict], ...]


@dataclass(frozen=True)
class ActionSufficiencyVerdict:
    sufficient: bool
    optimal_return: float  # over the full action set
    restricted_return: float
    action_subset: tuple[str, ...]
    method: str
    delta: float


@dataclass(frozen=True)
class ActionNecessityVerdict:
    necessary: bool
    base: ActionSufficiencyVerdict
    removals: tuple[tuple[str, ActionSufficiencyVerdict], ...]


def meets_threshold(best: float, optimal: float, delta: float) -> bool:
    """best >= optimal - delta*|optimal|, with a hair of float tolerance."""
    threshold = optimal - delta * abs(optimal)
    return best >= threshold - _VALUE_ATOL * max(1.0, abs(optimal))


# --------------------------------------------------------------------------
# Aggregation route


def _try_aggregate(
    mdp: TabularMdp, classes: dict[tuple[Any, ...], tuple[int, ...]]
) -> TabularMdp | None:
    """The aggregated MDP over observation classes, or None when states inside
    a class disagree (different rewards, different class-level transitions, or
    mixed terminality)."""
    group_of = np.empty(mdp.n_states, dtype=int)
    for g, indices in enumerate(classes.values()):
        group_of[list(indices)] = g
    n_groups = len(classes)
    indicator = np.zeros((mdp.n_states, n_groups))
    indicator[np.arange(mdp.n_states), group_of] = 1.0
    aggregated = mdp.transitions.reshape(-1, mdp.n_states) @ indicator
    aggregated = aggregated.reshape(mdp.n_states, mdp.n_actions, n_groups)
    rep_rows = np.empty((n_groups, mdp.n_actions, n_groups))
    rep_rewards = np.empty((n_groups, mdp.n_actions))
    terminal = np.empty(n_groups, dtype=bool)
    for g, indices in enumerate(classes.values()):
        members = list(indices)
        first = members[0]
        flags = mdp.terminal[members]
        if flags.any() != flags.all():
            return None
        if not np.allclose(
            mdp.rewards[members], mdp.rewards[first][None, :], rtol=0, atol=_AGG_ATOL
        ):
            return None
        if not np.allclose(
            aggregated[members], aggregated[first][None, :, :], rtol=0, atol=_AGG_ATOL
        ):
            return None
        rep_rows[g] = aggregated[first]
        rep_rewards[g] = mdp.rewards[first]
        terminal[g] = bool(flags[0])
    start = indicator.T @ mdp.start
    labels = tuple(f"obs{g}" for g in range(n_groups))
    return TabularMdp(
        states=labels,
        actions=mdp.actions,
        transitions=rep_rows,
        rewards=rep_rewards,
        start=start,
        discount=mdp.discount,
        horizon=mdp.horizon,
        terminal=terminal,
    )


def _stationary_certificate(aggregated: TabularMdp) -> np.ndarray | None:
    """One action per state that is greedy at every value-iteration sweep, or
    None when no such choice exists.

    Value iteration's H-step optimum ranges over step-indexed policies. A
    choice that is greedy at every steps-to-go count attains that optimum
    without consulting the step counter, so when one exists the aggregated
    value equals the best memoryless value and the shortcut is exact. When
    none exists the two optima can genuinely differ (stochastic MDPs routinely
    want different actions near the deadline) and enumeration must decide."""
    survivors = np.ones((aggregated.n_states, aggregated.n_actions), dtype=bool)
    values = np.zeros(aggregated.n_states)
    for _ in range(aggregated.horizon):
        q = aggregated.rewards + aggregated.discount * (aggregated.transitions @ values)
        best = q.max(axis=1)
        slack = _VALUE_ATOL * np.maximum(1.0, np.abs(best))
        survivors &= q >= (best - slack)[:, None]
        values = best
        values[aggregated.terminal] = 0.0
    survivors[aggregated.terminal] = True  # value pinned to zero; choice is moot
    if not survivors.any(axis=1).all():
        return None
    return survivors.argmax(axis=1)  # lowest surviving index per state


# --------------------------------------------------------------------------
# Enumeration route

_CHUNK = 4096


def _enumerate_policies(
    mdp: TabularMdp,
    classes: dict[tuple[Any, ...], tuple[int, ...]],
    budget: int,
) -> tuple[float, np.ndarray]:
    """Best value over deterministic observation policies and the (lexically
    first) argmax as per-group action indices. Groups made entirely of
    terminal states are pinned to action 0; their choice can never matter."""
    n_actions = mdp.n_actions
    group_lists = list(classes.values())
    n_groups = len(group_lists)
    group_of = np.empty(mdp.n_states, dtype=int)
    for g, indices in enumerate(group_lists):
        group_of[list(indices)] = g
    free = [g for g, indices in enumerate(group_lists) if not mdp.terminal[list(indices)].all()]
    needed = n_actions ** len(free)
    if needed > budget:
        raise BudgetExceeded(needed, budget)
    state_ix = np.arange(mdp.n_states)
    best_value = -np.inf
    best_groups: np.ndarray | None = None
    policies = product(range(n_actions), repeat=len(free))
    while True:
        chunk = list(islice(policies, _CHUNK))
        if not chunk:
            break
        k = len(chunk)
        group_actions = np.zeros((k, n_groups), dtype=int)
        if free:
            group_actions[:, free] = np.asarray(chunk, dtype=int)
        state_actions = group_actions[:, group_of]  # (k, S)
        chunk_rewards = mdp.rewards[state_ix[None, :], state_actions]  # (k, S)
        chunk_trans = mdp.transitions[state_ix[None, :], state_actions, :]  # (k, S, S)
        values = np.zeros((k, mdp.n_states))
        for _ in range(mdp.horizon):
            values = chunk_rewards + mdp.discount * np.einsum(
                "ksj,kj->ks", chunk_trans, values
            )
            values[:, mdp.terminal] = 0.0
        totals = values @ mdp.start
        arg = int(totals.argmax())
        if totals[arg] > best_value:
            best_value = float(totals[arg])
            best_groups = group_actions[arg].copy()
        del chunk_trans
    assert best_groups is not None
    return best_value, best_groups


# --------------------------------------------------------------------------
# Public operations


def best_reactive_return(
    mdp: TabularMdp,
    projection: ObservationProjection,
    budget: int = DEFAULT_BUDGET,
    force_method: str | None = None,
) -> tuple[float, WitnessPolicy, str]:
    """The best return any deterministic memoryless observation policy earns,
    the policy that earns it, and which route computed it.

    force_method pins the route (for cross-validation): METHOD_AGGREGATED
    raises ValueError when the projection is not Markov-consistent or when the
    aggregated optimum needs a step-dependent policy; METHOD_ENUMERATED skips
    the aggregation shortcut."""
    if len(projection.symbols) != mdp.n_states:
        raise ValueError(
            f"projection covers {len(projection.symbols)} states, MDP has {mdp.n_states}"
        )
    classes = projection.observation_classes()
    certificate = None
    aggregated = None
    if force_method != METHOD_ENUMERATED:
        aggregated = _try_aggregate(mdp, classes)
        if aggregated is None and force_method == METHOD_AGGREGATED:
            raise ValueError("projection is not Markov-consistent; cannot aggregate")
        if aggregated is not None:
            certificate = _stationary_certificate(aggregated)
            if certificate is None and force_method == METHOD_AGGREGATED:
                raise ValueError(
                    "aggregation would overshoot: the aggregated optimum needs a "
                    "step-dependent policy, so enumeration is authoritative here"
                )
    if certificate is not None:
        values = value_iteration(aggregated)
        best = float(values @ aggregated.start)
        group_actions = certificate
        method = METHOD_AGGREGATED
    else:
        best, group_actions = _enumerate_policies(mdp, classes, budget)
        method = METHOD_ENUMERATED
    witness = tuple(
        (symbol, mdp.actions[int(group_actions[g])]) for g, symbol in enumerate(classes)
    )
    return best, witness, method


def is_sufficient(
    mdp: TabularMdp,
    projection: ObservationProjection,
    delta: float = DEFAULT_DELTA,
    budget: int = DEFAULT_BUDGET,
) -> SufficiencyVerdict:
    optimal = float(value_iteration(mdp) @ mdp.start)
    best, witness, method = best_reactive_return(mdp, projection, budget)
    sufficient = meets_threshold(best, optimal, delta)
    return SufficiencyVerdict(
        sufficient=sufficient,
        optimal_return=optimal,
        best_reactive_return=best,
        witness_policy=witness if sufficient else None,
        method=method,
        delta=delta,
    )


def is_necessary_observation(
    mdp: TabularMdp,
    projection: ObservationProjection,
    delta: float = DEFAULT_DELTA,
    budget: int = DEFAULT_BUDGET,
) -> ObservationNecessityVerdict:
    """Necessary = sufficient as-is AND insufficient after removing any single
    attribute. The breakdown lists each removal's verdict."""
    if not projection.attribute_names:
        raise ValueError("necessity needs a projection with at least one attribute")
    base = is_sufficient(mdp, projection, delta, budget)
    removals = []
    for name in projection.attribute_names:
        removals.append((name, is_sufficient(mdp, projection.drop(name), delta, budget)))
    necessary = base.sufficient and all(not v.sufficient for _, v in removals)
    return ObservationNecessityVerdict(necessary, base, tuple(removals))


def is_sufficient_action(
    mdp: TabularMdp,
    action_subset: Sequence[str],
    delta: float = DEFAULT_DELTA,
) -> ActionSufficiencyVerdict:
    """Sufficiency of a restricted action set against the FULL-action optimum."""
    if not action_subset:
        raise ValueError("action subset must be nonempty")
    optimal = float(value_iteration(mdp) @ mdp.start)
    restricted = restrict_actions(mdp, action_subset)
    restricted_return = float(value_iteration(restricted) @ restricted.start)
    return ActionSufficiencyVerdict(
        sufficient=meets_threshold(restricted_return, optimal, delta),
        optimal_return=optimal,
        restricted_return=restricted_return,
        action_subset=tuple(action_subset),
        method=METHOD_RESTRICTED,
        delta=delta,
    )


def is_necessary_action(
    mdp: TabularMdp,
    action_subset: Sequence[str],
    delta: float = DEFAULT_DELTA,
) -> ActionNecessityVerdict:
    base = is_sufficient_action(mdp, action_subset, delta)
    removals = []
    for label in action_subset:
        remaining = [a for a in action_subset if a != label]
        if remaining:
            removals.append((label, is_sufficient_action(mdp, remaining, delta)))
        else:
            # Removing the only action leaves no policies at all, so nothing
            # can reach any threshold: unconditionally insufficient.
            removals.append(
                (
                    label,
                    ActionSufficiencyVerdict(
                        sufficient=False,
                        optimal_return=base.optimal_return,
                        restricted_return=float("-inf"),
                        action_subset=(),
                        method=METHOD_RESTRICTED,
                        delta=delta,
                    ),
                )
            )
    necessary = base.sufficient and all(not v.sufficient for _, v in removals)
    return ActionNecessityVerdict(necessary, base, tuple(removals))
