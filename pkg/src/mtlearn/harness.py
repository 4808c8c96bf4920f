"""Experiment orchestration: metrics, grid sweeps, seed replication.

A sweep runs scheduled Q-learning over the full (fast rate, slow rate,
switching period) grid for every seed, then aggregates per-cell means
and standard errors of the final return and of the area under the
smoothed evaluation curve. Cells partition into regimes by their rate
pair: equal rates are independent learning, a zero rate is sequential
learning, and the remaining off-diagonal cells are multi-timescale.
Equal-rate cells do not depend on the switching period, so they are
executed once and shared across periods.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .envs import env_from_config
from .learners import EpsilonSchedule, QLearnerConfig, RunLog, train
from .schedule import INFINITE, make_schedule


class DegenerateRangeError(ValueError):
    """Raised when min == max makes [0, 1] normalization undefined."""


class DegenerateGapError(ValueError):
    """Raised when the reference gap is zero."""


# ---------------------------------------------------------------------------
# Metrics


def normalize_returns(returns: Mapping[str, float]) -> dict[str, float]:
    """Affine map of one task's per-algorithm returns onto [0, 1]."""
    if len(returns) < 2:
        raise DegenerateRangeError("need returns from at least two algorithms")
    values = list(returns.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        raise DegenerateRangeError(f"all returns equal ({lo}); range is degenerate")
    return {name: (v - lo) / (hi - lo) for name, v in returns.items()}


def aggregate(scores: Mapping[str, Mapping[str, float]]) -> dict[str, tuple[float, float]]:
    """(mean, median) across tasks per algorithm; task sets must agree."""
    if not scores:
        raise ValueError("no scores to aggregate")
    task_sets = {name: frozenset(per_task) for name, per_task in scores.items()}
    reference = next(iter(task_sets.values()))
    if not reference:
        raise ValueError("empty task set")
    for name, tasks in task_sets.items():
        if tasks != reference:
            raise ValueError(f"algorithm {name!r} covers different tasks")
    out = {}
    for name, per_task in scores.items():
        values = [per_task[t] for t in sorted(per_task)]
        out[name] = (sum(values) / len(values), float(statistics.median(values)))
    return out


def gap_recovered(dt: float, mdt: float, ctde: float) -> float:
    """Percentage of the centralized-vs-decentralized gap closed by mdt."""
    if ctde == dt:
        raise DegenerateGapError("reference gap is zero (ctde == dt)")
    return (mdt - dt) * 100.0 / (ctde - dt)


def smooth(curve: Sequence[float], window: int = 5) -> list[float]:
    """Trailing moving average; early points average the available prefix."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = list(curve)
    if not values:
        raise ValueError("cannot smooth an empty curve")
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def curve_auc(points: Sequence[tuple[int, float]], window: int = 5) -> float:
    """Average height of the smoothed eval curve (trapezoidal integral
    over training steps, divided by the covered step span)."""
    if not points:
        raise ValueError("empty curve")
    steps = [p[0] for p in points]
    vals = smooth([p[1] for p in points], window)
    if len(points) == 1:
        return vals[0]
    span = steps[-1] - steps[0]
    if span <= 0:
        raise ValueError("eval steps must be increasing")
    integral = sum((vals[i] + vals[i + 1]) * 0.5 * (steps[i + 1] - steps[i])
                   for i in range(len(steps) - 1))
    return integral / span


def _stderr(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / math.sqrt(len(values))


# ---------------------------------------------------------------------------
# Sweep configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated sweep description; ``raw`` keeps the exact input dict."""

    env: dict
    lr0_values: tuple[float, ...]
    lr1_values: tuple[float, ...]
    switch_periods: tuple[float, ...]
    seeds: tuple[int, ...]
    total_steps: int
    eval_every: int
    eval_episodes: int
    q_config: QLearnerConfig
    raw: dict

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    payload = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def _parse_period(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinite", "infinity"):
            return INFINITE
        raise ValueError(f"unrecognized switching period {value!r}")
    if isinstance(value, (int, float)) and math.isinf(value):
        return INFINITE
    return float(int(value))


def load_experiment_config(raw: dict) -> ExperimentConfig:
    """Parse and validate a sweep config dict (see README for the schema)."""
    try:
        env = dict(raw["env"])
        grid = raw["grid"]
        lr0 = tuple(float(v) for v in grid["lr0"])
        lr1 = tuple(float(v) for v in grid["lr1"])
        periods = tuple(_parse_period(v) for v in grid["switch_periods"])
        seeds = tuple(int(s) for s in raw["seeds"])
    except KeyError as missing:
        raise ValueError(f"config is missing required key {missing}") from None
    if not lr0 or not lr1 or not periods:
        raise ValueError("lr0, lr1, and switch_periods must all be non-empty")
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    q_raw = raw.get("q", {})
    q_config = QLearnerConfig(
        epsilon=EpsilonSchedule(
            start=float(q_raw.get("epsilon_start", 1.0)),
            end=float(q_raw.get("epsilon_end", 0.05)),
            decay_steps=int(q_raw.get("epsilon_decay_steps", max(1, int(raw["total_steps"]) // 2))),
        ),
        discount=float(q_raw.get("discount", 0.95)),
    )
    return ExperimentConfig(
        env=env, lr0_values=lr0, lr1_values=lr1, switch_periods=periods,
        seeds=seeds, total_steps=int(raw["total_steps"]),
        eval_every=int(raw.get("eval_every", max(1, int(raw["total_steps"]) // 20))),
        eval_episodes=int(raw.get("eval_episodes", 10)),
        q_config=q_config, raw=raw,
    )


def cell_regime(lr0: float, lr1: float) -> str:
    if lr0 == lr1:
        return "independent"
    if lr0 == 0.0 or lr1 == 0.0:
        return "sequential"
    return "multi_timescale"


# ---------------------------------------------------------------------------
# Sweep execution


def _execute_run(payload: dict):
    """Single (cell, seed) training job; top level so worker pools can pickle it."""
    try:
        env_cfg = payload["env"]
        env = env_from_config(env_cfg)
        sched = make_schedule(env.n, payload["levels"], s=payload["period"])
        q_config = QLearnerConfig(
            epsilon=EpsilonSchedule(*payload["epsilon"]),
            discount=payload["discount"],
        )
        log = train(lambda: env_from_config(env_cfg), sched, q_config,
                    payload["total_steps"], payload["eval_every"],
                    payload["eval_episodes"], payload["seed"],
                    config_digest=payload["digest"])
        return log, None
    except Exception as exc:  # noqa: BLE001 - per-cell failures must not kill the sweep
        return None, f"{type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class CellResult:
    lr0: float
    lr1: float
    period: float
    regime: str
    runs: tuple[RunLog | None, ...]
    errors: tuple[str | None, ...]
    per_seed_final: tuple[float, ...]
    per_seed_auc: tuple[float, ...]
    final_mean: float
    final_stderr: float
    auc_mean: float
    auc_stderr: float

    @property
    def ok(self) -> bool:
        return all(e is None for e in self.errors)


@dataclass(frozen=True)
class SweepResult:
    digest: str
    lr0_values: tuple[float, ...]
    lr1_values: tuple[float, ...]
    switch_periods: tuple[float, ...]
    seeds: tuple[int, ...]
    total_steps: int
    cells: tuple[CellResult, ...]  # lr0-major, then lr1, then period

    def cell(self, i0: int, i1: int, ip: int) -> CellResult:
        stride1 = len(self.switch_periods)
        stride0 = len(self.lr1_values) * stride1
        return self.cells[i0 * stride0 + i1 * stride1 + ip]

    def best_cell(self, regime: str) -> CellResult:
        candidates = [c for c in self.cells if c.regime == regime and c.ok]
        if not candidates:
            raise ValueError(f"no successful cells in regime {regime!r}")
        best = candidates[0]
        for c in candidates[1:]:
            if c.final_mean > best.final_mean:
                best = c
        return best

    def performance_gain(self) -> tuple[float, float]:
        """Relative gain of the best multi-timescale cell over the best
        independent cell, with a first-order propagated standard error."""
        ind = self.best_cell("independent")
        mt = self.best_cell("multi_timescale")
        if mt.final_mean == ind.final_mean:
            return 0.0, 0.0
        if ind.final_mean == 0.0:
            return math.copysign(math.inf, mt.final_mean), math.inf
        gain = (mt.final_mean - ind.final_mean) / abs(ind.final_mean)
        err = math.sqrt(mt.final_stderr ** 2 + ind.final_stderr ** 2) / abs(ind.final_mean)
        return gain, err


def run_sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Run the full grid; equal-rate cells are executed once per seed.

    Jobs are independent and may run on a process pool; results are
    reassembled in deterministic grid order, so the outcome does not
    depend on the worker count.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    digest = config.digest
    eps = config.q_config.epsilon

    def payload(lr0: float, lr1: float, period: float, seed: int) -> dict:
        return {
            "env": config.env, "levels": (lr0, lr1), "period": period,
            "epsilon": (eps.start, eps.end, eps.decay_steps),
            "discount": config.q_config.discount,
            "total_steps": config.total_steps, "eval_every": config.eval_every,
            "eval_episodes": config.eval_episodes, "seed": seed, "digest": digest,
        }

    # Unique jobs: equal-rate cells do not depend on the switching period.
    job_keys: list[tuple] = []
    job_payloads: list[dict] = []
    key_index: dict[tuple, int] = {}
    first_period = config.switch_periods[0]
    for lr0 in config.lr0_values:
        for lr1 in config.lr1_values:
            for period in config.switch_periods:
                for seed in config.seeds:
                    key = ((lr0, seed) if lr0 == lr1
                           else (lr0, lr1, period, seed))
                    if key in key_index:
                        continue
                    key_index[key] = len(job_keys)
                    job_keys.append(key)
                    run_period = first_period if lr0 == lr1 else period
                    job_payloads.append(payload(lr0, lr1, run_period, seed))

    if workers == 1:
        outcomes = [_execute_run(p) for p in job_payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_execute_run, job_payloads))

    cells: list[CellResult] = []
    for lr0 in config.lr0_values:
        for lr1 in config.lr1_values:
            for period in config.switch_periods:
                runs: list[RunLog | None] = []
                errors: list[str | None] = []
                for seed in config.seeds:
                    key = ((lr0, seed) if lr0 == lr1
                           else (lr0, lr1, period, seed))
                    log, err = outcomes[key_index[key]]
                    runs.append(log)
                    errors.append(err)
                finals = [r.final_return for r in runs if r is not None]
                aucs = [curve_auc(r.eval_points) for r in runs if r is not None]
                cells.append(CellResult(
                    lr0=lr0, lr1=lr1, period=period,
                    regime=cell_regime(lr0, lr1),
                    runs=tuple(runs), errors=tuple(errors),
                    per_seed_final=tuple(finals), per_seed_auc=tuple(aucs),
                    final_mean=sum(finals) / len(finals) if finals else math.nan,
                    final_stderr=_stderr(finals),
                    auc_mean=sum(aucs) / len(aucs) if aucs else math.nan,
                    auc_stderr=_stderr(aucs),
                ))

    return SweepResult(
        digest=digest, lr0_values=config.lr0_values, lr1_values=config.lr1_values,
        switch_periods=config.switch_periods, seeds=config.seeds,
        total_steps=config.total_steps, cells=tuple(cells),
    )
