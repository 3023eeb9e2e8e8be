"""Two-player Coin Game on a small grid, without the pickup penalty.

Cells are numbered row-major. Red is agent 0, blue is agent 1; a coin's colour
is 0 (red) or 1 (blue). Own-colour coins pay 1, other coins pay 0.2. If both
players land on the coin they both collect it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..multi import MultiAgentGame

UP, DOWN, LEFT, RIGHT = range(4)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
OWN_REWARD = 1.0
OTHER_REWARD = 0.2
RED, BLUE = 0, 1


@dataclass(frozen=True)
class CoinGameState:
    grid_size: int
    red: int
    blue: int
    coin: int
    color: int
    step_count: int = 0

    def __post_init__(self):
        cells = self.grid_size ** 2
        for name in ("red", "blue", "coin"):
            v = getattr(self, name)
            if not 0 <= v < cells:
                raise ValueError(f"{name} cell {v} outside a {self.grid_size}x{self.grid_size} grid")
        if self.color not in (RED, BLUE):
            raise ValueError(f"coin colour must be 0 or 1, got {self.color}")

    @property
    def positions(self):
        return (self.red, self.blue)

    def cell(self, idx):
        return divmod(idx, self.grid_size)


def move(cell, action, grid_size):
    if not 0 <= action < 4:
        raise ValueError(f"invalid action {action}")
    r, c = divmod(cell, grid_size)
    dr, dc = MOVES[action]
    r = min(max(r + dr, 0), grid_size - 1)
    c = min(max(c + dc, 0), grid_size - 1)
    return r * grid_size + c


def collect(red, blue, coin, color):
    """Rewards (red, blue) after the move, and whether the coin was taken."""
    rewards = [0.0, 0.0]
    for i, pos in enumerate((red, blue)):
        if pos == coin:
            rewards[i] = OWN_REWARD if color == i else OTHER_REWARD
    return rewards, rewards[0] > 0 or rewards[1] > 0


def free_cells(red, blue, grid_size):
    return [c for c in range(grid_size ** 2) if c != red and c != blue]


def coin_game_reset(rng, grid_size=3):
    cells = grid_size ** 2
    red = int(rng.integers(cells))
    blue = int(rng.integers(cells))
    free = free_cells(red, blue, grid_size)
    return CoinGameState(grid_size, red, blue, int(rng.choice(free)), int(rng.integers(2)), 0)


def coin_game_step(state, joint_action, rng, max_steps=20):
    """Move both players, pay collectors, respawn a taken coin on a free cell."""
    a_red, a_blue = joint_action
    g = state.grid_size
    red, blue = move(state.red, a_red, g), move(state.blue, a_blue, g)
    rewards, taken = collect(red, blue, state.coin, state.color)
    coin, color = state.coin, state.color
    if taken:
        coin = int(rng.choice(free_cells(red, blue, g)))
        color = int(rng.integers(2))
    nxt = replace(state, red=red, blue=blue, coin=coin, color=color, step_count=state.step_count + 1)
    return nxt, np.array(rewards), nxt.step_count >= max_steps


def encode(state):
    cells = state.grid_size ** 2
    return ((state.red * cells + state.blue) * cells + state.coin) * 2 + state.color


def decode(idx, grid_size=3):
    cells = grid_size ** 2
    idx, color = divmod(idx, 2)
    idx, coin = divmod(idx, cells)
    red, blue = divmod(idx, cells)
    return CoinGameState(grid_size, red, blue, coin, color)


def step_toward(cell, target, grid_size):
    """Action that shortens the distance to ``target`` (rows first)."""
    r, c = divmod(cell, grid_size)
    tr, tc = divmod(target, grid_size)
    if tr < r:
        return UP
    if tr > r:
        return DOWN
    if tc < c:
        return LEFT
    if tc > c:
        return RIGHT
    return UP


def make_coin_game(grid_size=3, max_steps=20, gamma=0.99, alpha=0.1):
    """Tabulate the game over ids (red, blue, coin, colour).

    Ids with the coin under a player never occur after reset but are kept so
    the encoding stays a plain mixed radix.
    """
    cells = grid_size ** 2
    S = cells * cells * cells * 2
    J = 16
    K = 2 * cells
    ns = np.zeros((S, J, K), dtype=np.int64)
    npb = np.zeros((S, J, K))
    rew = np.zeros((S, J, 2))
    for s in range(S):
        st = decode(s, grid_size)
        for j in range(J):
            a_red, a_blue = divmod(j, 4)
            red, blue = move(st.red, a_red, grid_size), move(st.blue, a_blue, grid_size)
            rewards, taken = collect(red, blue, st.coin, st.color)
            rew[s, j] = rewards
            if not taken:
                ns[s, j, :] = encode(replace(st, red=red, blue=blue))
                npb[s, j, 0] = 1.0
                continue
            free = free_cells(red, blue, grid_size)
            p = 1.0 / (2 * len(free))
            c = 0
            for cell in free:
                for color in (RED, BLUE):
                    ns[s, j, c] = encode(CoinGameState(grid_size, red, blue, cell, color))
                    npb[s, j, c] = p
                    c += 1
            ns[s, j, c:] = ns[s, j, c - 1]
    init = np.zeros(S)
    for red in range(cells):
        for blue in range(cells):
            free = free_cells(red, blue, grid_size)
            for cell in free:
                for color in (RED, BLUE):
                    init[encode(CoinGameState(grid_size, red, blue, cell, color))] = 1.0 / (cells * cells * len(free) * 2)
    return MultiAgentGame(
        n_agents=2, n_actions=4, next_state=ns, next_prob=npb, rewards=rew, initial=init,
        horizon=max_steps, gamma=gamma, alpha=alpha, name=f"coin-game-{grid_size}x{grid_size}-{max_steps}",
    )
