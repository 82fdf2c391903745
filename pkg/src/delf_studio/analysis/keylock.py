"""Grid-world generator: pick up a key, open a lock.

Canonical dynamics: four deterministic moves (N, S, E, W); moving off the
grid or into a wall cell leaves the agent in place; entering the key cell
picks the key up automatically; entering the lock cell while holding the key
pays +1 and terminates; every other step pays 0.

Coordinates: x is the column, y is the row, y grows southward. N decrements
y, S increments y, E increments x, W decrements x.

State features are (agent_x, agent_y, has_key), which is exactly the full
state, so the generated feature table supports projections that drop any of
the three.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .mdp import MdpFixture, ObservationProjection, TabularMdp

ACTIONS = ("N", "S", "E", "W")
_MOVES = {"N": (0, -1), "S": (0, 1), "E": (1, 0), "W": (-1, 0)}

Cell = tuple[int, int]


def generate_keylock(
    size: int = 3,
    key: Cell = (0, 2),
    lock: Cell = (2, 2),
    start: Cell = (0, 0),
    walls: Iterable[Cell] = (),
    gamma: float = 0.95,
    horizon: int = 20,
    name: str = "keylock",
) -> MdpFixture:
    wall_set = {tuple(w) for w in walls}
    key, lock, start = tuple(key), tuple(lock), tuple(start)
    if size < 2:
        raise ValueError("grid size must be at least 2")
    for label, cell in (("key", key), ("lock", lock), ("start", start)):
        if not _in_grid(cell, size):
            raise ValueError(f"{label} cell {cell} is outside the {size}x{size} grid")
        if cell in wall_set:
            raise ValueError(f"{label} cell {cell} is a wall")
    if key == lock:
        raise ValueError("key and lock must occupy different cells")
    open_cells = [
        (x, y) for y in range(size) for x in range(size) if (x, y) not in wall_set
    ]
    # State = (x, y, has_key); the lock cell with the key in hand is the goal
    # and terminal.
    states: list[tuple[int, int, int]] = []
    for cell in open_cells:
        for k in (0, 1):
            states.append((cell[0], cell[1], k))
    index = {s: i for i, s in enumerate(states)}
    labels = tuple(f"x{x}y{y}k{k}" for x, y, k in states)
    n = len(states)
    transitions = np.zeros((n, len(ACTIONS), n))
    rewards = np.zeros((n, len(ACTIONS)))
    terminal = np.zeros(n, dtype=bool)
    goal = (lock[0], lock[1], 1)
    terminal[index[goal]] = True
    for i, (x, y, k) in enumerate(states):
        if terminal[i]:
            transitions[i, :, i] = 1.0
            continue
        for a, action in enumerate(ACTIONS):
            dx, dy = _MOVES[action]
            nx, ny = x + dx, y + dy
            if not _in_grid((nx, ny), size) or (nx, ny) in wall_set:
                nx, ny = x, y
            nk = 1 if (k == 1 or (nx, ny) == key) else 0
            j = index[(nx, ny, nk)]
            transitions[i, a, j] = 1.0
            # Entering the lock while holding the key: the only reward. The
            # source state cannot itself be (lock, key); that one is terminal.
            if (nx, ny) == lock and nk == 1:
                rewards[i, a] = 1.0
    start_state = (start[0], start[1], 1 if start == key else 0)
    start_vec = np.zeros(n)
    start_vec[index[start_state]] = 1.0
    mdp = TabularMdp(
        states=labels,
        actions=ACTIONS,
        transitions=transitions,
        rewards=rewards,
        start=start_vec,
        discount=gamma,
        horizon=horizon,
        terminal=terminal,
    )
    features = ObservationProjection(
        ("agent_x", "agent_y", "has_key"),
        tuple((x, y, k) for x, y, k in states),
    )
    return MdpFixture(name=name, mdp=mdp, features=features)


def _in_grid(cell: Sequence[int], size: int) -> bool:
    x, y = cell
    return 0 <= x < size and 0 <= y < size
