"""Explicit finite MDPs with deterministic observation projections.

Returns are finite-horizon and discounted, so every quantity here is exactly
computable: H sweeps of value iteration, no convergence thresholds. Terminal
states self-loop with zero reward and their value is pinned to zero at every
sweep, so they contribute nothing regardless of horizon.

Fixture files are JSON: dense state/action label lists, sparse transition
triples (from, action, to) -> probability, sparse rewards, a start
distribution, gamma, horizon, terminals, and a per-state feature table that
observation projections select columns from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

FIXTURE_SCHEMA_VERSION = 1
_ATOL = 1e-12


class InvalidMdp(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TabularMdp:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    transitions: np.ndarray  # (S, A, S), each row a distribution
    rewards: np.ndarray  # (S, A)
    start: np.ndarray  # (S,), a distribution
    discount: float
    horizon: int
    terminal: np.ndarray  # (S,), bool

    def __post_init__(self):
        transitions = np.asarray(self.transitions, dtype=float)
        rewards = np.asarray(self.rewards, dtype=float)
        start = np.asarray(self.start, dtype=float)
        terminal = np.asarray(self.terminal, dtype=bool)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "terminal", terminal)
        n_states, n_actions = len(self.states), len(self.actions)
        if n_states == 0 or n_actions == 0:
            raise InvalidMdp("need at least one state and one action")
        if len(set(self.states)) != n_states or len(set(self.actions)) != n_actions:
            raise InvalidMdp("state and action labels must be unique")
        if transitions.shape != (n_states, n_actions, n_states):
            raise InvalidMdp(
                f"transitions shape {transitions.shape} != {(n_states, n_actions, n_states)}"
            )
        if rewards.shape != (n_states, n_actions):
            raise InvalidMdp(f"rewards shape {rewards.shape} != {(n_states, n_actions)}")
        if start.shape != (n_states,):
            raise InvalidMdp(f"start shape {start.shape} != {(n_states,)}")
        if terminal.shape != (n_states,):
            raise InvalidMdp(f"terminal shape {terminal.shape} != {(n_states,)}")
        if not (0.0 <= self.discount < 1.0):
            raise InvalidMdp(f"discount must be in [0,1), got {self.discount}")
        if self.horizon < 1:
            raise InvalidMdp(f"horizon must be positive, got {self.horizon}")
        if np.any(transitions < -_ATOL) or not np.all(np.isfinite(transitions)):
            raise InvalidMdp("transition probabilities must be finite and nonnegative")
        if not np.all(np.isfinite(rewards)):
            raise InvalidMdp("rewards must be finite")
        row_sums = transitions.sum(axis=2)
        bad = np.argwhere(np.abs(row_sums - 1.0) > _ATOL)
        if bad.size:
            s, a = bad[0]
            raise InvalidMdp(
                f"transition row for state {self.states[s]!r}, action "
                f"{self.actions[a]!r} sums to {row_sums[s, a]!r}, not 1"
            )
        if abs(start.sum() - 1.0) > _ATOL or np.any(start < -_ATOL):
            raise InvalidMdp("start must be a probability distribution")
        for s in np.flatnonzero(terminal):
            expected = np.zeros(n_states)
            expected[s] = 1.0
            if not np.allclose(transitions[s], expected[None, :], rtol=0, atol=_ATOL):
                raise InvalidMdp(f"terminal state {self.states[s]!r} must self-loop")
            if np.any(np.abs(rewards[s]) > _ATOL):
                raise InvalidMdp(f"terminal state {self.states[s]!r} must have zero reward")
        for arr in (transitions, rewards, start, terminal):
            arr.setflags(write=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_index(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise KeyError(f"unknown state {label!r}") from None

    def action_index(self, label: str) -> int:
        try:
            return self.actions.index(label)
        except ValueError:
            raise KeyError(f"unknown action {label!r}") from None


@dataclass(frozen=True)
class ObservationProjection:
    """What the agent sees: per state, the tuple of retained attribute values.

    Dropping an attribute removes a column, which can only merge observation
    classes, never split them."""

    attribute_names: tuple[str, ...]
    symbols: tuple[tuple[Any, ...], ...]

    def __post_init__(self):
        if len(set(self.attribute_names)) != len(self.attribute_names):
            raise ValueError("projection attribute names must be unique")
        width = len(self.attribute_names)
        for i, symbol in enumerate(self.symbols):
            if len(symbol) != width:
                raise ValueError(f"state {i} symbol has {len(symbol)} values, expected {width}")

    def keep(self, names: Sequence[str]) -> "ObservationProjection":
        """Retain the listed attributes (in this projection's column order)."""
        wanted = set(names)
        unknown = wanted - set(self.attribute_names)
        if unknown:
            raise KeyError(f"unknown attribute(s): {', '.join(sorted(unknown))}")
        cols = [i for i, n in enumerate(self.attribute_names) if n in wanted]
        return ObservationProjection(
            tuple(self.attribute_names[i] for i in cols),
            tuple(tuple(symbol[i] for i in cols) for symbol in self.symbols),
        )

    def drop(self, name: str) -> "ObservationProjection":
        if name not in self.attribute_names:
            raise KeyError(f"unknown attribute {name!r}")
        return self.keep([n for n in self.attribute_names if n != name])

    def observation_classes(self) -> dict[tuple[Any, ...], tuple[int, ...]]:
        """Observation symbol -> state indices, ordered by first occurrence."""
        classes: dict[tuple[Any, ...], list[int]] = {}
        for index, symbol in enumerate(self.symbols):
            classes.setdefault(symbol, []).append(index)
        return {symbol: tuple(indices) for symbol, indices in classes.items()}


def identity_projection(mdp: TabularMdp) -> ObservationProjection:
    """Full-state observation: one class per state."""
    return ObservationProjection(("state",), tuple((i,) for i in range(mdp.n_states)))


@dataclass(frozen=True, eq=False)
class MdpFixture:
    name: str
    mdp: TabularMdp
    features: ObservationProjection  # full feature table; projections select from it


# --------------------------------------------------------------------------
# Value iteration


def value_iteration(mdp: TabularMdp, action_indices: Sequence[int] | None = None) -> np.ndarray:
    """H-sweep finite-horizon optimal values, optionally over a subset of
    actions. Returns V with V[s] = optimal expected discounted return over the
    full horizon starting in s. Ties favor the lowest action index (matters
    only for policy extraction, not values)."""
    transitions, rewards = mdp.transitions, mdp.rewards
    if action_indices is not None:
        idx = list(action_indices)
        transitions = transitions[:, idx, :]
        rewards = rewards[:, idx]
    values = np.zeros(mdp.n_states)
    for _ in range(mdp.horizon):
        q = rewards + mdp.discount * (transitions @ values)
        values = q.max(axis=1)
        values[mdp.terminal] = 0.0
    return values


def greedy_policy(mdp: TabularMdp, values: np.ndarray) -> np.ndarray:
    """Lowest-index argmax of the one-step lookahead against final values."""
    q = mdp.rewards + mdp.discount * (mdp.transitions @ values)
    return q.argmax(axis=1)


def optimal_return(mdp: TabularMdp) -> float:
    """Exact H-step discounted return from the start distribution under an
    optimal (time-varying) policy."""
    return float(value_iteration(mdp) @ mdp.start)


def restrict_actions(mdp: TabularMdp, action_labels: Sequence[str]) -> TabularMdp:
    """The same MDP with only the listed actions available."""
    if not action_labels:
        raise InvalidMdp("action subset must be nonempty")
    indices = [mdp.action_index(label) for label in action_labels]
    if len(set(indices)) != len(indices):
        raise InvalidMdp("action subset contains duplicates")
    return TabularMdp(
        states=mdp.states,
        actions=tuple(mdp.actions[i] for i in indices),
        transitions=mdp.transitions[:, indices, :],
        rewards=mdp.rewards[:, indices],
        start=mdp.start,
        discount=mdp.discount,
        horizon=mdp.horizon,
        terminal=mdp.terminal,
    )


# --------------------------------------------------------------------------
# Fixture files


def mdp_fixture_to_dict(fixture: MdpFixture) -> dict[str, Any]:
    mdp = fixture.mdp
    transitions = []
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for t in np.flatnonzero(mdp.transitions[s, a] > 0.0):
                transitions.append(
                    [mdp.states[s], mdp.actions[a], mdp.states[int(t)], float(mdp.transitions[s, a, t])]
                )
    rewards = []
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            if mdp.rewards[s, a] != 0.0:
                rewards.append([mdp.states[s], mdp.actions[a], float(mdp.rewards[s, a])])
    start = {mdp.states[int(s)]: float(mdp.start[s]) for s in np.flatnonzero(mdp.start > 0.0)}
    return {
        "schema_version": FIXTURE_SCHEMA_VERSION,
        "name": fixture.name,
        "states": list(mdp.states),
        "actions": list(mdp.actions),
        "start": start,
        "gamma": mdp.discount,
        "horizon": mdp.horizon,
        "terminals": [mdp.states[int(s)] for s in np.flatnonzero(mdp.terminal)],
        "transitions": transitions,
        "rewards": rewards,
        "features": {
            "names": list(fixture.features.attribute_names),
            "values": {
                mdp.states[i]: list(symbol) for i, symbol in enumerate(fixture.features.symbols)
            },
        },
    }


def mdp_fixture_from_dict(data: Mapping[str, Any]) -> MdpFixture:
    version = data.get("schema_version")
    if version != FIXTURE_SCHEMA_VERSION:
        raise InvalidMdp(f"unsupported fixture schema_version {version!r}")
    states = tuple(str(s) for s in data["states"])
    actions = tuple(str(a) for a in data["actions"])
    s_index = {label: i for i, label in enumerate(states)}
    a_index = {label: i for i, label in enumerate(actions)}
    n_states, n_actions = len(states), len(actions)
    transitions = np.zeros((n_states, n_actions, n_states))
    for entry in data["transitions"]:
        src, action, dst, p = entry
        try:
            transitions[s_index[str(src)], a_index[str(action)], s_index[str(dst)]] += float(p)
        except KeyError as exc:
            raise InvalidMdp(f"transition references unknown label {exc}") from None
    rewards = np.zeros((n_states, n_actions))
    for entry in data.get("rewards", []):
        src, action, r = entry
        try:
            rewards[s_index[str(src)], a_index[str(action)]] = float(r)
        except KeyError as exc:
            raise InvalidMdp(f"reward references unknown label {exc}") from None
    terminal = np.zeros(n_states, dtype=bool)
    for label in data.get("terminals", []):
        if str(label) not in s_index:
            raise InvalidMdp(f"terminal references unknown state {label!r}")
        terminal[s_index[str(label)]] = True
    # Terminal rows may be omitted from the file; they are implied.
    for s in np.flatnonzero(terminal):
        if transitions[s].sum() == 0.0:
            transitions[s, :, s] = 1.0
    start_field = data["start"]
    start = np.zeros(n_states)
    if isinstance(start_field, str):
        if start_field not in s_index:
            raise InvalidMdp(f"start references unknown state {start_field!r}")
        start[s_index[start_field]] = 1.0
    else:
        for label, p in start_field.items():
            if str(label) not in s_index:
                raise InvalidMdp(f"start references unknown state {label!r}")
            start[s_index[str(label)]] = float(p)
    mdp = TabularMdp(
        states=states,
        actions=actions,
        transitions=transitions,
        rewards=rewards,
        start=start,
        discount=float(data["gamma"]),
        horizon=int(data["horizon"]),
        terminal=terminal,
    )
    feats = data.get("features")
    if feats:
        names = tuple(str(n) for n in feats["names"])
        values = feats["values"]
        missing = [s for s in states if s not in values]
        if missing:
            raise InvalidMdp(f"features missing for state(s): {', '.join(missing[:3])}")
        symbols = tuple(tuple(values[s]) for s in states)
        features = ObservationProjection(names, symbols)
    else:
        features = identity_projection(mdp)
    return MdpFixture(name=str(data.get("name", "")), mdp=mdp, features=features)


def load_mdp_fixture(path: str | Path) -> MdpFixture:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidMdp(f"{path}: not valid JSON: {exc}") from exc
    return mdp_fixture_from_dict(data)


def save_mdp_fixture(fixture: MdpFixture, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(mdp_fixture_to_dict(fixture), indent=2) + "\n", encoding="utf-8"
    )
