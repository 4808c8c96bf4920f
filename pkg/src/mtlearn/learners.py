"""Decentralized tabular learners driven by the rate scheduler.

Each agent owns a Q-table over its private observation ids and updates
it online with whatever learning rate the schedule assigns at that
update step, so independent, sequential, two-timescale, and rotating
multi-timescale training are all the same loop. A plain single-rate
learner with an identical structure serves as the reduction reference,
and a stochastic-gradient learner covers the linear estimation problem.

Randomness is fanned out from one master seed into separate streams
(episode seeds, per-agent exploration, evaluation), so evaluation never
perturbs training and changing the agent count never shifts the
episode stream.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .envs import StepResult
from .estimation import TeamEstimationProblem, team_mse
from .schedule import Schedule, position_levels, rotation_at

QTable = dict[int, list[float]]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear exploration decay from start to end over decay_steps."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 1

    def __post_init__(self):
        if not (0.0 <= self.start <= 1.0 and 0.0 <= self.end <= 1.0):
            raise ValueError("epsilon bounds must lie in [0, 1]")
        if self.decay_steps < 1:
            raise ValueError("decay_steps must be >= 1")

    def value(self, t: int) -> float:
        if t >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (t / self.decay_steps)


@dataclass(frozen=True)
class QLearnerConfig:
    epsilon: EpsilonSchedule = EpsilonSchedule()
    discount: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")


@dataclass(frozen=True)
class RunLog:
    """Evaluation trace of one seeded training run.

    ``eval_points`` holds (update step, mean greedy return over
    ``eval_episodes`` episodes); for estimation runs the second member
    is the exact team error and ``eval_episodes`` is 0. ``final_return``
    averages the last five eval points. Estimation runs also carry the
    final gain vector and, optionally, the whole gain trajectory.
    """

    seed: int
    eval_points: tuple[tuple[int, float], ...]
    final_return: float
    eval_episodes: int
    config_digest: str = ""
    final_gains: tuple[float, ...] | None = None
    gains_trace: tuple[tuple[float, ...], ...] | None = None


def _final_window_mean(values: list[float], window: int = 5) -> float:
    if not values:
        raise ValueError("no evaluation points recorded")
    tail = values[-window:]
    return sum(tail) / len(tail)


def runlog_to_csv(log: RunLog) -> str:
    lines = ["step,mean_eval_return"]
    for step, value in log.eval_points:
        lines.append(f"{step},{value!r}")
    lines.append(f"final,{log.final_return!r}")
    return "\n".join(lines) + "\n"


def q_update(table: QTable, obs: int, action: int, reward: float, next_obs: int,
             done: bool, lr: float, discount: float, n_actions: int) -> float:
    """One tabular Q-learning update; returns the new entry.

    A zero learning rate is an exact no-op: the table is not touched,
    not even to materialize a missing row.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if lr == 0.0:
        row = table.get(obs)
        return row[action] if row is not None else 0.0
    row = table.get(obs)
    if row is None:
        row = [0.0] * n_actions
        table[obs] = row
    if done:
        target = reward
    else:
        nxt = table.get(next_obs)
        target = reward + discount * (max(nxt) if nxt is not None else 0.0)
    row[action] += lr * (target - row[action])
    return row[action]


def greedy_action(table: QTable, obs: int, n_actions: int) -> int:
    row = table.get(obs)
    if row is None:
        return 0
    best = 0
    for a in range(1, n_actions):
        if row[a] > row[best]:
            best = a
    return best


def select_action(table: QTable, obs: int, epsilon: float, rng: random.Random,
                  n_actions: int) -> int:
    """Epsilon-greedy action; greedy ties break to the lowest action id."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return rng.randrange(n_actions)
    return greedy_action(table, obs, n_actions)


def _spawn_streams(seed: int, n_agents: int):
    """Master-seed fan-out: (episode rng, eval rng, per-agent exploration rngs)."""
    root = np.random.SeedSequence(seed)
    env_ss, eval_ss, explore_ss = root.spawn(3)

    def to_rng(ss: np.random.SeedSequence) -> random.Random:
        return random.Random(int.from_bytes(ss.generate_state(4, np.uint32).tobytes(), "little"))

    return to_rng(env_ss), to_rng(eval_ss), [to_rng(ss) for ss in explore_ss.spawn(n_agents)]


def _evaluate_greedy(env_factory, tables: list[QTable], action_counts,
                     episodes: int, eval_rng: random.Random) -> float:
    total = 0.0
    for _ in range(episodes):
        env = env_factory()
        obs = env.reset(eval_rng.getrandbits(32))
        ep_return = 0.0
        while True:
            actions = [greedy_action(tables[i], obs[i], action_counts[i])
                       for i in range(len(tables))]
            res: StepResult = env.step(actions)
            ep_return += res.reward
            obs = res.observations
            if res.done:
                break
        total += ep_return
    return total / episodes


def _validate_train_args(total_steps: int, eval_every: int, eval_episodes: int) -> None:
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    if eval_episodes < 1:
        raise ValueError(f"eval_episodes must be >= 1, got {eval_episodes}")


def train_with_tables(env_factory, schedule: Schedule, q_config: QLearnerConfig,
                      total_steps: int, eval_every: int, eval_episodes: int,
                      seed: int, config_digest: str = "") -> tuple[RunLog, list[QTable]]:
    """Scheduled decentralized Q-learning; also returns the learned tables."""
    _validate_train_args(total_steps, eval_every, eval_episodes)
    env = env_factory()
    n = env.n
    if schedule.n != n:
        raise ValueError(f"schedule is for {schedule.n} agents, environment has {n}")
    action_counts = env.action_counts
    tables: list[QTable] = [{} for _ in range(n)]
    env_rng, eval_rng, explore_rngs = _spawn_streams(seed, n)

    levels = schedule.levels
    pos_level = position_levels(schedule)
    eps = q_config.epsilon
    discount = q_config.discount

    eval_steps: list[int] = []
    eval_returns: list[float] = []
    obs = env.reset(env_rng.getrandbits(32))
    for t in range(total_steps):
        eps_t = eps.value(t)
        actions = [select_action(tables[i], obs[i], eps_t, explore_rngs[i], action_counts[i])
                   for i in range(n)]
        res = env.step(actions)
        rot = rotation_at(schedule, t)
        for i in range(n):
            lr = levels[pos_level[(i - rot) % n]]
            q_update(tables[i], obs[i], actions[i], res.reward, res.observations[i],
                     res.done, lr, discount, action_counts[i])
        obs = res.observations
        done_steps = t + 1
        if done_steps % eval_every == 0 or done_steps == total_steps:
            if not eval_steps or eval_steps[-1] != done_steps:
                eval_steps.append(done_steps)
                eval_returns.append(_evaluate_greedy(env_factory, tables, action_counts,
                                                     eval_episodes, eval_rng))
        if res.done:
            obs = env.reset(env_rng.getrandbits(32))

    log = RunLog(seed=seed,
                 eval_points=tuple(zip(eval_steps, eval_returns)),
                 final_return=_final_window_mean(eval_returns),
                 eval_episodes=eval_episodes,
                 config_digest=config_digest)
    return log, tables


def train(env_factory, schedule: Schedule, q_config: QLearnerConfig,
          total_steps: int, eval_every: int, eval_episodes: int,
          seed: int, config_digest: str = "") -> RunLog:
    """Scheduled decentralized Q-learning, returning the evaluation log."""
    log, _ = train_with_tables(env_factory, schedule, q_config, total_steps,
                               eval_every, eval_episodes, seed, config_digest)
    return log


def train_single_rate(env_factory, lr: float, q_config: QLearnerConfig,
                      total_steps: int, eval_every: int, eval_episodes: int,
                      seed: int, config_digest: str = "") -> RunLog:
    """Reference learner: every agent always updates with the same rate.

    Deliberately implemented as its own plain loop (no scheduler) so it
    can serve as an independent reduction target for equal-rate
    schedules.
    """
    _validate_train_args(total_steps, eval_every, eval_episodes)
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    env = env_factory()
    n = env.n
    action_counts = env.action_counts
    tables: list[QTable] = [{} for _ in range(n)]
    env_rng, eval_rng, explore_rngs = _spawn_streams(seed, n)
    eps = q_config.epsilon
    discount = q_config.discount

    eval_steps: list[int] = []
    eval_returns: list[float] = []
    obs = env.reset(env_rng.getrandbits(32))
    for t in range(total_steps):
        eps_t = eps.value(t)
        actions = [select_action(tables[i], obs[i], eps_t, explore_rngs[i], action_counts[i])
                   for i in range(n)]
        res = env.step(actions)
        for i in range(n):
            q_update(tables[i], obs[i], actions[i], res.reward, res.observations[i],
                     res.done, lr, discount, action_counts[i])
        obs = res.observations
        done_steps = t + 1
        if done_steps % eval_every == 0 or done_steps == total_steps:
            if not eval_steps or eval_steps[-1] != done_steps:
                eval_steps.append(done_steps)
                eval_returns.append(_evaluate_greedy(env_factory, tables, action_counts,
                                                     eval_episodes, eval_rng))
        if res.done:
            obs = env.reset(env_rng.getrandbits(32))

    return RunLog(seed=seed,
                  eval_points=tuple(zip(eval_steps, eval_returns)),
                  final_return=_final_window_mean(eval_returns),
                  eval_episodes=eval_episodes,
                  config_digest=config_digest)


def _safe_mse(problem: TeamEstimationProblem, gains: np.ndarray) -> float:
    """Team error with diverged iterates mapped to infinity instead of noise."""
    if not np.all(np.isfinite(gains)):
        return float("inf")
    with np.errstate(over="ignore", invalid="ignore"):
        value = team_mse(problem, gains)
    return value if math.isfinite(value) else float("inf")


def estimation_gradient(problem: TeamEstimationProblem, gains: np.ndarray,
                        x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample-average gradient of the team error on a batch of draws.

    ``x`` has shape (batch,), ``y`` shape (batch, n). Unbiased for the
    analytic gradient ``(2 / n**2) * (gamma @ K - eta)``.
    """
    n = problem.n
    resid = x[:, None] - y * gains[None, :]
    row_sum = resid.sum(axis=1)
    per_agent = problem.p * resid + problem.q * (row_sum[:, None] - resid)
    return (-2.0 / (n * n)) * np.mean(y * per_agent, axis=0)


def train_estimation(problem: TeamEstimationProblem, schedule: Schedule,
                     batch_size: int, total_steps: int, seed: int,
                     eval_every: int | None = None, exact_gradient: bool = False,
                     record_gains: bool = False, config_digest: str = "") -> RunLog:
    """Stochastic-gradient learning of the estimation gains.

    Every agent holds one gain, starting from zero. Each update step
    draws a fresh batch from the generative model (or uses the analytic
    gradient when ``exact_gradient`` is set) and every agent moves with
    its scheduled rate. Steps are preconditioned by the per-coordinate
    curvature, so a rate of exactly 1 with exact gradients performs an
    exact per-coordinate best response: synchronized rate-1 updates are
    the simultaneous-update iteration and one rotation of a zero-slow,
    period-1 schedule is the sequential one.

    The log records the exact team error at evaluation points.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    n = problem.n
    if schedule.n != n:
        raise ValueError(f"schedule is for {schedule.n} agents, problem has {n}")
    if eval_every is None:
        eval_every = max(1, total_steps // 50)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    gains = np.zeros(n)
    diag = np.diag(problem.gamma)
    precond = (n * n) / (2.0 * diag)
    noise_std = math.sqrt(problem.sigma2)
    levels = schedule.levels
    pos_level = position_levels(schedule)

    trace = [tuple(gains)] if record_gains else None
    eval_steps: list[int] = []
    eval_values: list[float] = []
    for t in range(total_steps):
        if exact_gradient:
            grad = (2.0 / (n * n)) * (problem.gamma @ gains - problem.eta)
        else:
            x = rng.standard_normal(batch_size)
            y = x[:, None] + noise_std * rng.standard_normal((batch_size, n))
            grad = estimation_gradient(problem, gains, x, y)
        rot = rotation_at(schedule, t)
        rates = np.array([levels[pos_level[(i - rot) % n]] for i in range(n)])
        gains = gains - rates * precond * grad
        if record_gains:
            trace.append(tuple(gains))
        done_steps = t + 1
        if done_steps % eval_every == 0 or done_steps == total_steps:
            if not eval_steps or eval_steps[-1] != done_steps:
                eval_steps.append(done_steps)
                eval_values.append(_safe_mse(problem, gains))

    return RunLog(seed=seed,
                  eval_points=tuple(zip(eval_steps, eval_values)),
                  final_return=_final_window_mean(eval_values),
                  eval_episodes=0,
                  config_digest=config_digest,
                  final_gains=tuple(float(g) for g in gains),
                  gains_trace=tuple(trace) if trace is not None else None)
