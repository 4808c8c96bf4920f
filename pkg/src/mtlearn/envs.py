"""Desk-scale cooperative environments with a shared episodic contract.

Both environments expose ``reset(seed) -> observations`` and
``step(joint_action) -> StepResult`` plus the per-agent action and
observation space sizes, so learners can treat them uniformly. The
matrix-game environment replays a fixed team game for a set horizon;
the foraging environment is a small gridworld where agents must stand
next to a food item and load it together.
"""

from __future__ import annotations

import copy
import itertools
import random
from dataclasses import dataclass
from typing import Sequence

from .games import TeamGame, make_game


class SearchBudgetError(RuntimeError):
    """Raised when exhaustive planning would exceed its expansion budget."""


@dataclass(frozen=True)
class StepResult:
    observations: tuple[int, ...]
    reward: float
    done: bool


class MatrixGameEnv:
    """Repeated shared-payoff matrix game; all agents observe state id 0."""

    def __init__(self, game: TeamGame, horizon: int = 1):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.game = game
        self.horizon = horizon
        self.n = game.n
        self._t = 0

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.game.action_counts

    @property
    def observation_space_sizes(self) -> tuple[int, ...]:
        return (1,) * self.n

    def reset(self, seed: int = 0) -> tuple[int, ...]:
        self._t = 0
        return (0,) * self.n

    def step(self, joint_action: Sequence[int]) -> StepResult:
        acts = tuple(int(a) for a in joint_action)
        if len(acts) != self.n:
            raise ValueError(f"expected {self.n} actions, got {len(acts)}")
        for i, a in enumerate(acts):
            if not 0 <= a < self.game.action_counts[i]:
                raise ValueError(f"invalid action {a} for agent {i}")
        reward = float(self.game.payoff[acts])
        self._t += 1
        return StepResult(observations=(0,) * self.n, reward=reward,
                          done=self._t >= self.horizon)

    def get_state(self):
        return (self._t,)

    def set_state(self, state) -> None:
        (self._t,) = state


# Action ids for the foraging gridworld.
UP, DOWN, LEFT, RIGHT, STAY, LOAD = range(6)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


@dataclass(frozen=True)
class ForagingConfig:
    """Layout and rules for the foraging gridworld.

    Positions are (row, col). ``agent_positions`` / ``food_positions``
    may be None, in which case the reset seed draws distinct free cells.
    ``view_radius`` of None means full observability (every agent sees
    the complete state id); otherwise an agent only resolves entities
    within the given Chebyshev radius. With ``cooperative_only`` set,
    every food must be too heavy for any single agent.
    """

    width: int
    height: int
    agent_levels: tuple[int, ...]
    food_levels: tuple[int, ...]
    agent_positions: tuple[tuple[int, int], ...] | None = None
    food_positions: tuple[tuple[int, int], ...] | None = None
    horizon: int = 50
    cooperative_only: bool = False
    view_radius: int | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.agent_levels or any(l < 1 for l in self.agent_levels):
            raise ValueError("agent levels must be positive integers")
        if not self.food_levels or any(l < 1 for l in self.food_levels):
            raise ValueError("food levels must be positive integers")
        if max(self.food_levels) > sum(self.agent_levels):
            raise ValueError("unsolvable layout: a food exceeds the combined agent level")
        if self.cooperative_only and min(self.food_levels) <= max(self.agent_levels):
            raise ValueError("cooperative_only requires every food to need more than one agent")
        for positions, count, label in (
            (self.agent_positions, len(self.agent_levels), "agent"),
            (self.food_positions, len(self.food_levels), "food"),
        ):
            if positions is None:
                continue
            if len(positions) != count:
                raise ValueError(f"{label} positions do not match {label} count")
            for r, c in positions:
                if not (0 <= r < self.height and 0 <= c < self.width):
                    raise ValueError(f"{label} position ({r}, {c}) outside the grid")
        fixed = list(self.agent_positions or ()) + list(self.food_positions or ())
        if len(set(fixed)) != len(fixed):
            raise ValueError("fixed positions overlap")
        total_cells = self.width * self.height
        if len(self.agent_levels) + len(self.food_levels) > total_cells:
            raise ValueError("more entities than grid cells")
        if self.view_radius is not None and self.view_radius < 0:
            raise ValueError("view radius must be >= 0")

    @property
    def n(self) -> int:
        return len(self.agent_levels)


def foraging_config_from_ascii(rows: Sequence[str], horizon: int = 50,
                               cooperative_only: bool = False,
                               view_radius: int | None = None) -> ForagingConfig:
    """Parse an ASCII layout into a fixed-position config.

    Digits 1-9 are agents with that level, letters a-i are foods with
    level 1-9, '.' (or space) is an empty cell. Agents and foods are
    numbered in reading order.
    """
    if not rows:
        raise ValueError("empty layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("layout rows must have equal length")
    agent_levels: list[int] = []
    agent_positions: list[tuple[int, int]] = []
    food_levels: list[int] = []
    food_positions: list[tuple[int, int]] = []
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch in ". ":
                continue
            if ch.isdigit() and ch != "0":
                agent_levels.append(int(ch))
                agent_positions.append((r, c))
            elif "a" <= ch <= "i":
                food_levels.append(ord(ch) - ord("a") + 1)
                food_positions.append((r, c))
            else:
                raise ValueError(f"unrecognized layout character {ch!r} at ({r}, {c})")
    return ForagingConfig(
        width=width, height=len(rows),
        agent_levels=tuple(agent_levels), food_levels=tuple(food_levels),
        agent_positions=tuple(agent_positions), food_positions=tuple(food_positions),
        horizon=horizon, cooperative_only=cooperative_only, view_radius=view_radius,
    )


class ForagingEnv:
    """Cooperative level-based foraging on a small grid.

    Actions per agent: 0 up, 1 down, 2 left, 3 right, 4 stay, 5 load.
    Moves are resolved in agent-index order; a move onto a wall, another
    agent, or an uncollected food is ignored. A food is collected when
    the agents adjacent to it (4-neighborhood) that chose LOAD have a
    combined level at least the food's level; the reward is the food
    level divided by the total food level, so clearing everything in
    one episode yields exactly 1.0.
    """

    def __init__(self, config: ForagingConfig):
        self.config = config
        self.n = config.n
        self._total_level = float(sum(config.food_levels))
        self._agent_pos: list[tuple[int, int]] = []
        self._food_pos: list[tuple[int, int]] = []
        self._food_alive: list[bool] = []
        self._t = 0

    @property
    def action_counts(self) -> tuple[int, ...]:
        return (6,) * self.n

    @property
    def observation_space_sizes(self) -> tuple[int, ...]:
        cfg = self.config
        cells = cfg.width * cfg.height
        m = len(cfg.food_levels)
        if cfg.view_radius is None:
            size = cells ** self.n * (2 ** m)
            return (size,) * self.n
        base = (2 * cfg.view_radius + 1) ** 2 + 1
        size = cells * base ** (self.n - 1 + m)
        return (size,) * self.n

    def reset(self, seed: int = 0) -> tuple[int, ...]:
        cfg = self.config
        rng = random.Random(seed)
        taken: set[tuple[int, int]] = set()
        for positions in (cfg.agent_positions, cfg.food_positions):
            if positions is not None:
                taken.update(positions)

        def draw(count: int) -> list[tuple[int, int]]:
            free = [(r, c) for r in range(cfg.height) for c in range(cfg.width)
                    if (r, c) not in taken]
            chosen = rng.sample(free, count)
            taken.update(chosen)
            return chosen

        self._agent_pos = (list(cfg.agent_positions) if cfg.agent_positions is not None
                           else draw(self.n))
        self._food_pos = (list(cfg.food_positions) if cfg.food_positions is not None
                          else draw(len(cfg.food_levels)))
        self._food_alive = [True] * len(cfg.food_levels)
        self._t = 0
        return self._observations()

    def step(self, joint_action: Sequence[int]) -> StepResult:
        cfg = self.config
        acts = tuple(int(a) for a in joint_action)
        if len(acts) != self.n:
            raise ValueError(f"expected {self.n} actions, got {len(acts)}")
        for i, a in enumerate(acts):
            if not 0 <= a < 6:
                raise ValueError(f"invalid action {a} for agent {i}")

        # Movement, lowest agent index first; earlier moves free their cell.
        occupied = set(self._agent_pos)
        food_cells = {self._food_pos[k] for k in range(len(self._food_alive))
                      if self._food_alive[k]}
        for i, a in enumerate(acts):
            delta = _MOVES.get(a)
            if delta is None:
                continue
            r, c = self._agent_pos[i]
            target = (r + delta[0], c + delta[1])
            if not (0 <= target[0] < cfg.height and 0 <= target[1] < cfg.width):
                continue
            if target in occupied or target in food_cells:
                continue
            occupied.discard((r, c))
            occupied.add(target)
            self._agent_pos[i] = target

        # Joint loading against post-movement positions.
        reward = 0.0
        loaders = [i for i, a in enumerate(acts) if a == LOAD]
        for k, alive in enumerate(self._food_alive):
            if not alive:
                continue
            fr, fc = self._food_pos[k]
            strength = sum(cfg.agent_levels[i] for i in loaders
                           if abs(self._agent_pos[i][0] - fr)
                           + abs(self._agent_pos[i][1] - fc) == 1)
            if strength >= cfg.food_levels[k]:
                self._food_alive[k] = False
                reward += cfg.food_levels[k] / self._total_level

        self._t += 1
        done = not any(self._food_alive) or self._t >= cfg.horizon
        return StepResult(observations=self._observations(), reward=reward, done=done)

    def remaining_food_fraction(self) -> float:
        alive = sum(l for l, a in zip(self.config.food_levels, self._food_alive) if a)
        return alive / self._total_level

    def get_state(self):
        return (self._t, tuple(self._agent_pos), tuple(self._food_pos),
                tuple(self._food_alive))

    def set_state(self, state) -> None:
        t, agent_pos, food_pos, alive = state
        self._t = t
        self._agent_pos = list(agent_pos)
        self._food_pos = list(food_pos)
        self._food_alive = list(alive)

    def _observations(self) -> tuple[int, ...]:
        cfg = self.config
        w = cfg.width
        cells = w * cfg.height
        if cfg.view_radius is None:
            code = 0
            for r, c in self._agent_pos:
                code = code * cells + (r * w + c)
            for alive in self._food_alive:
                code = code * 2 + (1 if alive else 0)
            return (code,) * self.n

        radius = cfg.view_radius
        span = 2 * radius + 1
        invisible = span * span
        base = invisible + 1
        obs = []
        for i in range(self.n):
            ar, ac = self._agent_pos[i]
            code = ar * w + ac
            for j in range(self.n):
                if j == i:
                    continue
                code = code * base + self._relative_code(ar, ac, self._agent_pos[j],
                                                         radius, span, invisible)
            for k in range(len(self._food_alive)):
                if self._food_alive[k]:
                    rel = self._relative_code(ar, ac, self._food_pos[k],
                                              radius, span, invisible)
                else:
                    rel = invisible
                code = code * base + rel
            obs.append(code)
        return tuple(obs)

    @staticmethod
    def _relative_code(ar: int, ac: int, pos: tuple[int, int],
                       radius: int, span: int, invisible: int) -> int:
        dr = pos[0] - ar
        dc = pos[1] - ac
        if abs(dr) > radius or abs(dc) > radius:
            return invisible
        return (dr + radius) * span + (dc + radius)


def optimal_return(env, seed: int = 0, budget: int = 10_000_000) -> float:
    """Maximum achievable episode return, by exhaustive plan search.

    Works on a deep copy, so the passed environment is untouched. The
    search memoizes values by full environment state and raises
    :class:`SearchBudgetError` once more than ``budget`` joint actions
    have been expanded.
    """
    sim = copy.deepcopy(env)
    sim.reset(seed)
    joint_actions = list(itertools.product(*(range(k) for k in sim.action_counts)))
    memo: dict = {}
    expansions = 0

    def value(state) -> float:
        nonlocal expansions
        cached = memo.get(state)
        if cached is not None:
            return cached
        best = None
        for ja in joint_actions:
            expansions += 1
            if expansions > budget:
                raise SearchBudgetError(
                    f"plan search exceeded {budget} expansions; the environment "
                    f"is too large for exhaustive planning"
                )
            sim.set_state(state)
            res = sim.step(ja)
            v = res.reward if res.done else res.reward + value(sim.get_state())
            if best is None or v > best:
                best = v
        memo[state] = best
        return best

    return value(sim.get_state())


def env_from_config(cfg: dict):
    """Build an environment from its JSON description.

    ``{"kind": "matrix_game", "payoff": [...], "horizon": 1}`` or
    ``{"kind": "foraging", "grid": ["..."], "horizon": 50,
    "cooperative_only": false, "view_radius": null}``.
    """
    kind = cfg.get("kind")
    if kind == "matrix_game":
        game = make_game(cfg["payoff"])
        return MatrixGameEnv(game, horizon=int(cfg.get("horizon", 1)))
    if kind == "foraging":
        config = foraging_config_from_ascii(
            cfg["grid"],
            horizon=int(cfg.get("horizon", 50)),
            cooperative_only=bool(cfg.get("cooperative_only", False)),
            view_radius=cfg.get("view_radius"),
        )
        return ForagingEnv(config)
    raise ValueError(f"unknown environment kind {kind!r}")
