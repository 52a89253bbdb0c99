"""Monte Carlo policy evaluation.

Rolls a policy through full episodes, logs every step, and aggregates
cost, action-usage and severity-occupancy statistics.  Competing policies
are compared on common random numbers: episode i of every policy starts
from the same seed, so cost differences are paired.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .env import Action, EnvConfig, PipeEnv, observe
from .hazards import N_STATES, STATES
from .policies import Policy

N_ACTIONS = 3
DEFAULT_GAMMA = 0.995


@dataclass
class EpisodeLog:
    """Time-indexed record of one episode.

    One row per decision: the pre-action observation (whose first entry
    is the pipe age written to the ``t`` CSV column), the action, and the
    cost components in euros.
    """

    policy: str
    start_age: float
    seed: int | None
    observations: np.ndarray    # (n_steps, 13)
    actions: np.ndarray         # (n_steps,) ints
    c_m: np.ndarray             # (n_steps,) euros <= 0
    c_r: np.ndarray
    c_f: np.ndarray
    r: np.ndarray               # normalized rewards in [-1, 0]

    CSV_HEADER = (
        "t,action,h1,h2,h3,h4,h5,hF,S1,S2,S3,S4,S5,SF,c_m,c_r,c_f,r"
    )

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    @property
    def total_cost(self) -> float:
        """Euros spent over the episode (positive)."""
        return float(-(self.c_m.sum() + self.c_r.sum() + self.c_f.sum()))

    def discounted_return(self, gamma: float = DEFAULT_GAMMA) -> float:
        return float(np.sum(self.r * gamma ** np.arange(self.n_steps)))

    def to_csv(self, dest: str | Path | IO[str]) -> None:
        if hasattr(dest, "write"):
            self._write(dest)
        else:
            with open(dest, "w", newline="") as f:
                self._write(f)

    def _write(self, f: IO[str]) -> None:
        f.write(self.CSV_HEADER + "\r\n")
        for k in range(self.n_steps):
            obs = self.observations[k]
            cells = [repr(float(obs[0])), str(int(self.actions[k]))]
            cells += [repr(float(v)) for v in obs[1:]]
            cells += [repr(float(x)) for x in
                      (self.c_m[k], self.c_r[k], self.c_f[k], self.r[k])]
            f.write(",".join(cells) + "\r\n")


def read_episode_csv(path: str | Path) -> EpisodeLog:
    """Read back an episode CSV written by EpisodeLog.to_csv.

    Values round-trip exactly (they are written with full precision), so
    statistics recomputed from the file match the in-memory aggregate."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    obs = np.array(
        [[float(row["t"])]
         + [float(row[c]) for c in ("h1", "h2", "h3", "h4", "h5", "hF",
                                    "S1", "S2", "S3", "S4", "S5", "SF")]
         for row in rows]
    )
    return EpisodeLog(
        policy="", start_age=float(obs[0, 0]), seed=None,
        observations=obs,
        actions=np.array([int(row["action"]) for row in rows]),
        c_m=np.array([float(row["c_m"]) for row in rows]),
        c_r=np.array([float(row["c_r"]) for row in rows]),
        c_f=np.array([float(row["c_f"]) for row in rows]),
        r=np.array([float(row["r"]) for row in rows]),
    )


@dataclass
class PolicyStats:
    """Aggregate statistics over a batch of episodes at one start age."""

    policy: str
    start_age: float
    episodes: int
    cost_mean_keur: float
    cost_std_keur: float
    action_pct: np.ndarray      # (3,) percent of steps per action
    severity_pct: np.ndarray    # (6,) percent of segment-steps per severity
    episode_costs_eur: np.ndarray

    def to_rows(self) -> list[tuple[str, float]]:
        rows = [
            ("episodes", float(self.episodes)),
            ("start_age", self.start_age),
            ("cost_mean_keur", self.cost_mean_keur),
            ("cost_std_keur", self.cost_std_keur),
        ]
        rows += [(f"pct_action_{a}", float(self.action_pct[a]))
                 for a in range(N_ACTIONS)]
        rows += [(f"pct_severity_{STATES[k]}", float(self.severity_pct[k]))
                 for k in range(N_STATES)]
        return rows

    def to_csv(self, dest: str | Path | IO[str]) -> None:
        lines = "metric,value\r\n" + "".join(
            f"{name},{repr(value)}\r\n" for name, value in self.to_rows()
        )
        if hasattr(dest, "write"):
            dest.write(lines)
        else:
            Path(dest).write_text(lines, newline="")


def run_episode(policy: Policy, cfg: EnvConfig, start_age: float | None = None,
                seed: int | None = None) -> EpisodeLog:
    """Roll one full episode: horizon / decision_interval steps.

    Deterministic given (policy, cfg, start_age, seed).  The intervention
    clock handed to the policy starts at infinity (nothing has ever been
    done to the pipe) and resets on maintain or replace.
    """
    env = PipeEnv(cfg)
    state = env.reset(seed=seed, start_age=start_age)
    initial_age = state.age
    n = cfg.n_steps
    obs_log = np.empty((n, 13))
    actions = np.empty(n, dtype=np.int64)
    c_m = np.empty(n)
    c_r = np.empty(n)
    c_f = np.empty(n)
    r = np.empty(n)
    clock = math.inf
    for k in range(n):
        obs = observe(state)
        action = Action(policy.decide(obs, clock))
        state, breakdown, done = env.step(action)
        obs_log[k] = obs
        actions[k] = int(action)
        c_m[k], c_r[k], c_f[k], r[k] = (
            breakdown.c_m, breakdown.c_r, breakdown.c_f, breakdown.r,
        )
        if action != Action.DO_NOTHING:
            clock = 0.0
        clock += cfg.decision_interval
    assert done
    return EpisodeLog(
        policy=policy.name,
        start_age=float(initial_age),
        seed=seed,
        observations=obs_log,
        actions=actions,
        c_m=c_m, c_r=c_r, c_f=c_f, r=r,
    )


def aggregate(logs: Sequence[EpisodeLog], policy: str = "",
              start_age: float = 0.0) -> PolicyStats:
    """Fold episode logs into PolicyStats.

    Severity occupancy weights every segment at every decision step once;
    the health fractions in the log carry exactly that information.
    """
    costs = np.array([log.total_cost for log in logs])
    all_actions = np.concatenate([log.actions for log in logs])
    action_pct = (
        np.bincount(all_actions, minlength=N_ACTIONS) / all_actions.size * 100.0
    )
    health = np.concatenate([log.observations[:, 1:7] for log in logs], axis=0)
    severity_pct = health.mean(axis=0) * 100.0
    return PolicyStats(
        policy=policy or logs[0].policy,
        start_age=start_age,
        episodes=len(logs),
        cost_mean_keur=float(costs.mean()) / 1000.0,
        cost_std_keur=float(costs.std(ddof=1) if len(costs) > 1 else 0.0) / 1000.0,
        action_pct=action_pct,
        severity_pct=severity_pct,
        episode_costs_eur=costs,
    )


def evaluate(policy: Policy, cfg: EnvConfig, start_ages: Sequence[float],
             n_episodes: int, base_seed: int = 0) -> list[PolicyStats]:
    """Evaluate one policy at each start age over n_episodes episodes,
    seeded base_seed .. base_seed + n_episodes - 1."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    out = []
    for age in start_ages:
        logs = [run_episode(policy, cfg, start_age=age, seed=base_seed + e)
                for e in range(n_episodes)]
        out.append(aggregate(logs, policy=policy.name, start_age=age))
    return out


def compare(policies: Sequence[Policy], cfg: EnvConfig,
            start_ages: Sequence[float], n_episodes: int,
            base_seed: int = 0) -> dict[str, list[PolicyStats]]:
    """Evaluate several policies on the same seed sequence.

    Episode e of every policy runs from seed base_seed + e, so per-episode
    costs (kept inside each PolicyStats) are paired across policies.
    """
    if not policies:
        raise ValueError("need at least one policy")
    return {
        policy.name: evaluate(policy, cfg, start_ages, n_episodes, base_seed)
        for policy in policies
    }
