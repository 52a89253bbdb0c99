"""Segment-level pipe maintenance environment.

A pipe of length L is split into ceil(L / segment) one-per-segment
severity states.  Every ``decision_interval`` years the agent picks one
of three actions; segments then degrade independently according to the
dynamics model.  The 13-element observation is

    (pipe age, h_1..h_5, h_F, S_1..S_5, S_F)

where h is the fraction of segments at each severity and S is the
prognosis model's occupancy forecast at the current pipe age.  Rewards
are nonpositive normalized costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InvalidStateError
from .hazards import FAILED, Family, N_STATES
from .msdm import DegradationModel


class Action(IntEnum):
    DO_NOTHING = 0
    MAINTAIN = 1
    REPLACE = 2


# severity indices whose segments a maintenance pass repairs (levels 3..5)
_REPAIRABLE = (2, 3, 4)
# severity index segments are repaired to (level 2)
_REPAIR_TARGET = 1


@dataclass
class EnvConfig:
    """Environment parameters: geometry, timing, costs, models.

    ``dynamics`` drives the stochastic degradation of the segments;
    ``prognosis`` only feeds the forecast channel of the observation.
    The two may differ, which is how train/test model mismatch is set up.
    """

    dynamics: DegradationModel
    prognosis: DegradationModel
    length_m: float = 40.0
    segment_m: float = 1.0
    diameter_mm: float = 200.0
    decision_interval: float = 0.5
    horizon: float = 100.0
    age_range: tuple[float, float] = (0.0, 50.0)
    # when set, random initial ages are snapped to this grid (keeps the
    # transition-matrix cache small for long training runs)
    age_grid: float | None = None
    failure_penalty: float = 100_000.0
    logistic_cost: float = 500.0
    # repair cost per segment by severity index; levels 1, 2 and F are
    # never repaired, their entries exist only to keep indexing flat
    maintenance_costs: tuple[float, ...] = (0.0, 0.0, 500.0, 700.0, 900.0, 0.0)
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.segment_m < self.length_m:
            raise ConfigError("need 0 < segment_m < length_m")
        if self.diameter_mm <= 0.0:
            raise ConfigError("diameter_mm must be positive")
        if self.decision_interval <= 0.0:
            raise ConfigError("decision_interval must be positive")
        steps = self.horizon / self.decision_interval
        if self.horizon <= 0.0 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError("horizon must be a positive multiple of decision_interval")
        lo, hi = self.age_range
        if lo < 0.0 or hi < lo:
            raise ConfigError("age_range must satisfy 0 <= lo <= hi")
        if len(self.maintenance_costs) != N_STATES:
            raise ConfigError("maintenance_costs needs one entry per severity")
        if min(self.maintenance_costs) < 0.0 or self.failure_penalty <= 0.0 \
                or self.logistic_cost < 0.0:
            raise ConfigError("costs must be nonnegative, failure_penalty positive")

    @property
    def n_segments(self) -> int:
        return math.ceil(self.length_m / self.segment_m)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.decision_interval))

    @property
    def reward_scale(self) -> float:
        """Denominator of the normalized reward: worst failure penalty plus
        repairing every segment at the most expensive severity."""
        return self.failure_penalty + max(self.maintenance_costs) * self.n_segments

    @property
    def replacement_cost(self) -> float:
        """Cost in euros of replacing the whole pipe (positive number)."""
        d = self.diameter_mm
        return (450.0 + 0.66 * d + 0.0008 * d * d) * self.length_m

    def to_dict(self) -> dict:
        return {
            "dynamics": {"family": self.dynamics.family.value},
            "prognosis": {"family": self.prognosis.family.value},
            "length_m": self.length_m,
            "segment_m": self.segment_m,
            "diameter_mm": self.diameter_mm,
            "decision_interval": self.decision_interval,
            "horizon": self.horizon,
            "age_range": list(self.age_range),
            "age_grid": self.age_grid,
            "failure_penalty": self.failure_penalty,
            "logistic_cost": self.logistic_cost,
            "maintenance_costs": list(self.maintenance_costs),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path | None = None) -> "EnvConfig":
        def model(key, default_family):
            spec = raw.get(key, {"family": default_family})
            if "file" in spec:
                path = Path(spec["file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                return DegradationModel.from_file(path)
            return DegradationModel.from_family(Family(spec["family"]))

        try:
            kwargs = {
                "dynamics": model("dynamics", "weibull"),
                "prognosis": model("prognosis", "weibull"),
            }
            for name in ("length_m", "segment_m", "diameter_mm",
                         "decision_interval", "horizon", "failure_penalty",
                         "logistic_cost", "seed", "age_grid"):
                if name in raw:
                    kwargs[name] = raw[name]
            if "age_range" in raw:
                kwargs["age_range"] = tuple(raw["age_range"])
            if "maintenance_costs" in raw:
                kwargs["maintenance_costs"] = tuple(raw["maintenance_costs"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad environment config: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "EnvConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=Path(path).parent)


def default_config(dynamics: str = "weibull", prognosis: str | None = None,
                   **overrides) -> EnvConfig:
    """The standard single-pipe setup: 40 m x 1 m segments, 200 mm bore,
    half-year decisions over a 100-year episode, CMW-calibrated models."""
    prognosis = prognosis or dynamics
    return EnvConfig(
        dynamics=DegradationModel.from_family(Family(dynamics)),
        prognosis=DegradationModel.from_family(Family(prognosis)),
        **overrides,
    )


@dataclass(frozen=True)
class PipeState:
    """Simulation state: pipe age, per-segment severities, derived health
    fractions, prognosis forecast, and the episode clock."""

    age: float
    severities: np.ndarray        # (n_segments,) int8 severity indices 0..5
    health: np.ndarray            # (6,) fractions, sums to 1 exactly
    prognosis: np.ndarray         # (6,) occupancy forecast at `age`
    elapsed: float = 0.0          # episode time since reset, in years


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-step cost components in euros (all <= 0) and the normalized
    reward r = (c_m + c_r + c_f) / reward_scale, clamped into [-1, 0]."""

    c_m: float
    c_r: float
    c_f: float
    r: float


def severity_counts(severities: np.ndarray) -> np.ndarray:
    return np.bincount(severities, minlength=N_STATES)


def health_vector(severities: np.ndarray, n_segments: int) -> np.ndarray:
    return severity_counts(severities) / n_segments


def make_state(cfg: EnvConfig, age: float, severities, elapsed: float = 0.0) -> PipeState:
    """Build a consistent state from raw severities (indices 0..5)."""
    severities = np.asarray(severities, dtype=np.int8)
    if severities.shape != (cfg.n_segments,):
        raise InvalidStateError(
            f"expected {cfg.n_segments} segment severities, got {severities.shape}"
        )
    if severities.min() < 0 or severities.max() >= N_STATES:
        raise InvalidStateError("severity indices must lie in 0..5")
    return PipeState(
        age=float(age),
        severities=severities,
        health=health_vector(severities, cfg.n_segments),
        prognosis=cfg.prognosis.occupancy_at(float(age)),
        elapsed=float(elapsed),
    )


def _check_state(state: PipeState, cfg: EnvConfig) -> None:
    if state.severities.shape != (cfg.n_segments,):
        raise InvalidStateError("segment count does not match config")
    counts = severity_counts(state.severities)
    if not np.array_equal(counts / cfg.n_segments, state.health):
        raise InvalidStateError("health vector inconsistent with severities")


def sample_severities(dist: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. severity indices from a distribution over the six states."""
    cum = np.cumsum(dist)
    cum[-1] = max(cum[-1], 1.0)
    return np.searchsorted(cum, rng.random(n), side="right").astype(np.int8)


def _advance(severities: np.ndarray, p: np.ndarray,
             rng: np.random.Generator) -> np.ndarray:
    """Move every segment one interval forward by sampling its row of P."""
    cum = np.cumsum(p, axis=1)
    cum[:, -1] = 1.0
    rows = cum[severities]
    u = rng.random(severities.shape[0])
    return np.minimum((rows < u[:, None]).sum(axis=1), N_STATES - 1).astype(np.int8)


def apply_maintenance(severities: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Repair map: severities 3..5 drop to 2; levels 1, 2 and F untouched.

    Returns (repaired severities, pre-repair counts) so the cost can be
    charged on what was actually repaired.
    """
    counts = severity_counts(severities)
    repaired = severities.copy()
    mask = (severities >= _REPAIRABLE[0]) & (severities <= _REPAIRABLE[-1])
    repaired[mask] = _REPAIR_TARGET
    return repaired, counts


def reset(cfg: EnvConfig, rng: np.random.Generator,
          fixed_age: float | None = None) -> PipeState:
    """Sample an initial state.

    The pipe age is ``fixed_age`` or a uniform draw from cfg.age_range;
    each segment's severity is an i.i.d. draw from the dynamics model's
    occupancy at that age.
    """
    if fixed_age is not None:
        if fixed_age < 0.0:
            raise ConfigError("fixed_age must be nonnegative")
        age = float(fixed_age)
    else:
        age = rng.uniform(*cfg.age_range)
        if cfg.age_grid:
            age = round(age / cfg.age_grid) * cfg.age_grid
    dist = cfg.dynamics.occupancy_at(age)
    severities = sample_severities(dist, cfg.n_segments, rng)
    return make_state(cfg, age, severities)


def transition(state: PipeState, action: Action, cfg: EnvConfig,
               rng: np.random.Generator) -> tuple[PipeState, RewardBreakdown, bool]:
    """One decision step.

    do nothing -- segments degrade over the interval, age advances.
    maintain   -- repair first (charged on pre-repair counts plus the
                  fixed logistic cost), then degrade as above.
    replace    -- brand-new pipe: age 0, all segments at level 1, no
                  degradation this step.

    The failure penalty is charged whenever the post-step pipe has at
    least one failed segment and the action was not replace.  The episode
    ends once the elapsed episode time reaches the horizon.
    """
    _check_state(state, cfg)
    action = Action(action)
    c_m = c_r = c_f = 0.0

    if action is Action.REPLACE:
        c_r = -cfg.replacement_cost
        new_age = 0.0
        severities = np.zeros(cfg.n_segments, dtype=np.int8)
    else:
        severities = state.severities
        if action is Action.MAINTAIN:
            severities, pre_counts = apply_maintenance(severities)
            repair = sum(pre_counts[k] * cfg.maintenance_costs[k] for k in _REPAIRABLE)
            c_m = -(repair + cfg.logistic_cost)
        p = cfg.dynamics.transition_matrix(state.age, cfg.decision_interval)
        severities = _advance(severities, p, rng)
        new_age = state.age + cfg.decision_interval
        if (severities == FAILED).any():
            c_f = -cfg.failure_penalty

    r = max((c_m + c_r + c_f) / cfg.reward_scale, -1.0)
    elapsed = state.elapsed + cfg.decision_interval
    new_state = make_state(cfg, new_age, severities, elapsed=elapsed)
    done = elapsed >= cfg.horizon - 1e-9
    return new_state, RewardBreakdown(c_m=c_m, c_r=c_r, c_f=c_f, r=r), done


def observe(state: PipeState) -> np.ndarray:
    """The 13-element observation (age, health fractions, prognosis)."""
    return np.concatenate(([state.age], state.health, state.prognosis))


class PipeEnv:
    """Stateful wrapper around the pure transition functions.

    One instance owns one RNG and one episode at a time; run many
    instances with independent seeds for parallel rollouts.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.seed)
        self.state: PipeState | None = None
        self.done = False

    def reset(self, seed: int | None = None,
              start_age: float | None = None) -> PipeState:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.state = reset(self.cfg, self._rng, fixed_age=start_age)
        self.done = False
        return self.state

    def step(self, action: Action) -> tuple[PipeState, RewardBreakdown, bool]:
        if self.state is None:
            raise InvalidStateError("step before reset")
        self.state, breakdown, self.done = transition(
            self.state, action, self.cfg, self._rng
        )
        return self.state, breakdown, self.done

    def observe(self) -> np.ndarray:
        if self.state is None:
            raise InvalidStateError("observe before reset")
        return observe(self.state)
