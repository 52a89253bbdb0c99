"""Multi-state degradation dynamics.

Builds the time-dependent rate matrix Q(t) from a hazard table, solves
the probability-flow ODE for the state-occupancy curve S_k(t), and
integrates interval transition matrices P(t, t+dt) used to advance pipe
segments between decisions.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .hazards import (
    FAILED,
    Family,
    HazardTable,
    N_STATES,
    TRANSITIONS,
    cmw_hazard_table,
    cmw_initial_state,
    load_hazard_file,
)

RTOL = 1e-8
ATOL = 1e-10

# Weibull hazards with shape < 1 diverge at t = 0 (integrably).  Inside the
# ODE right-hand side, rates are evaluated no earlier than this age; for the
# calibrated tables the transition mass ignored this way is below 1e-4.
SINGULARITY_FLOOR = 1e-9

# Largest tolerated negative overshoot in an integrated transition matrix.
_NEGATIVE_MASS_TOL = 1e-9

_ROW_F_UNIT = np.zeros(N_STATES)
_ROW_F_UNIT[FAILED] = 1.0


@dataclass
class OccupancyCurve:
    """State-occupancy probabilities sampled on an age grid."""

    times: np.ndarray          # (n,) ages in years
    values: np.ndarray         # (n, 6) probability vectors

    CSV_HEADER = "t,S1,S2,S3,S4,S5,SF"

    def to_csv(self, dest: str | Path | IO[str]) -> None:
        """Write the curve as CSV with 9 significant digits per value."""
        if hasattr(dest, "write"):
            self._write(dest)
        else:
            with open(dest, "w", newline="") as f:
                self._write(f)

    def _write(self, f: IO[str]) -> None:
        f.write(self.CSV_HEADER + "\r\n")
        for t, row in zip(self.times, self.values):
            cells = [f"{t:.9g}"] + [f"{v:.9g}" for v in row]
            f.write(",".join(cells) + "\r\n")


class DegradationModel:
    """An inhomogeneous Markov degradation model over the six severities.

    Immutable once constructed; the occupancy interpolant and the
    transition-matrix cache are internal and safe for concurrent readers.
    """

    def __init__(self, family: Family, table: HazardTable, initial: np.ndarray):
        self.family = Family(family)
        self.table = table
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (N_STATES,):
            raise DomainError("initial distribution must have six entries")
        if (initial < 0).any() or abs(initial.sum() - 1.0) > 1e-12:
            raise DomainError("initial distribution must be nonnegative and sum to 1")
        self.initial = initial.copy()
        self.initial.flags.writeable = False
        self._lock = threading.Lock()
        self._p_cache: dict[tuple[float, float], np.ndarray] = {}
        self._dense = None
        self._dense_span = 0.0

    @classmethod
    def from_family(cls, family: Family) -> "DegradationModel":
        """Built-in CMW-cohort model for the given hazard family."""
        fam = Family(family)
        return cls(fam, cmw_hazard_table(fam), cmw_initial_state(fam))

    @classmethod
    def from_file(cls, path: str | Path) -> "DegradationModel":
        family, table, s0 = load_hazard_file(path)
        return cls(family, table, s0)

    # caches and locks are rebuilt empty after unpickling
    def __getstate__(self):
        return {"family": self.family, "table": self.table, "initial": self.initial}

    def __setstate__(self, state):
        self.family = state["family"]
        self.table = state["table"]
        self.initial = state["initial"]
        self.initial.flags.writeable = False
        self._lock = threading.Lock()
        self._p_cache = {}
        self._dense = None
        self._dense_span = 0.0

    def rate_matrix(self, t: float) -> np.ndarray:
        """Q(t): off-diagonals are transition rates, rows sum to zero.

        Row F is identically zero (failure is absorbing).  Propagates
        SingularityError from hazard evaluation.
        """
        if t < 0.0:
            raise DomainError(f"rate matrix undefined for negative age t={t}")
        return self._q(self.table.rates(t))

    def _q(self, rates: np.ndarray) -> np.ndarray:
        q = np.zeros((N_STATES, N_STATES))
        for (i, j), rate in zip(TRANSITIONS, rates):
            q[i, j] = rate
        q[np.diag_indices(N_STATES)] = -q.sum(axis=1)
        return q

    def _q_floored(self, t: float) -> np.ndarray:
        return self._q(self.table.rates(max(t, SINGULARITY_FLOOR)))

    def occupancy(self, t_end: float, grid_step: float) -> OccupancyCurve:
        """Solve the occupancy ODE from the initial distribution.

        Returns the solution sampled every ``grid_step`` years on
        [0, t_end]; t_end itself is always included.
        """
        if t_end < 0.0:
            raise DomainError("t_end must be nonnegative")
        if grid_step <= 0.0:
            raise DomainError("grid_step must be positive")
        if t_end == 0.0:
            return OccupancyCurve(np.zeros(1), self.initial[None, :].copy())
        grid = np.arange(0.0, t_end + grid_step * 1e-9, grid_step)
        if grid[-1] < t_end * (1.0 - 1e-12):
            grid = np.append(grid, t_end)
        sol = solve_ivp(
            lambda t, y: y @ self._q_floored(t),
            (0.0, float(t_end)),
            self.initial,
            method="LSODA",
            rtol=RTOL,
            atol=ATOL,
            t_eval=grid,
        )
        if not sol.success:
            raise IntegrationError(f"occupancy solve failed: {sol.message}")
        values = np.clip(sol.y.T, 0.0, None)
        return OccupancyCurve(grid, values)

    def occupancy_at(self, t: float) -> np.ndarray:
        """Occupancy vector at a single age, via a cached dense solution."""
        if t < 0.0:
            raise DomainError("age must be nonnegative")
        if t == 0.0:
            return self.initial.copy()
        self._ensure_dense(t)
        return np.clip(self._dense(t), 0.0, None)

    def _ensure_dense(self, t: float) -> None:
        if self._dense is not None and t <= self._dense_span:
            return
        with self._lock:
            if self._dense is not None and t <= self._dense_span:
                return
            span = max(1.3 * t, 130.0)
            sol = solve_ivp(
                lambda s, y: y @ self._q_floored(s),
                (0.0, span),
                self.initial,
                method="LSODA",
                rtol=RTOL,
                atol=ATOL,
                dense_output=True,
            )
            if not sol.success:
                raise IntegrationError(f"occupancy solve failed: {sol.message}")
            self._dense = sol.sol
            self._dense_span = span

    def transition_matrix(self, t: float, dt: float) -> np.ndarray:
        """P(t, t+dt): row i gives the severity distribution after ``dt``
        years for a segment at severity i at age ``t``.

        Integrates dP/ds = P Q(s) from the identity; results are memoized
        per (t, dt) and returned read-only.
        """
        if t < 0.0:
            raise DomainError("t must be nonnegative")
        if dt <= 0.0:
            raise DomainError("dt must be positive")
        key = (float(t), float(dt))
        cached = self._p_cache.get(key)
        if cached is not None:
            return cached
        p = self._integrate_transition(t, dt)
        with self._lock:
            return self._p_cache.setdefault(key, p)

    def _integrate_transition(self, t: float, dt: float) -> np.ndarray:
        sol = solve_ivp(
            lambda s, p: (p.reshape(N_STATES, N_STATES) @ self._q_floored(s)).ravel(),
            (float(t), float(t + dt)),
            np.eye(N_STATES).ravel(),
            method="LSODA",
            rtol=RTOL,
            atol=ATOL,
        )
        if not sol.success:
            raise IntegrationError(f"transition solve failed: {sol.message}")
        p = sol.y[:, -1].reshape(N_STATES, N_STATES)
        low = p.min()
        if low < -_NEGATIVE_MASS_TOL:
            raise IntegrationError(
                f"transition matrix has negative mass {low:.3e} at t={t}, dt={dt}"
            )
        p = np.clip(p, 0.0, 1.0)
        p /= p.sum(axis=1, keepdims=True)
        p[FAILED] = _ROW_F_UNIT
        p.flags.writeable = False
        return p


def assemble_Q(model: DegradationModel, t: float) -> np.ndarray:
    """Rate matrix Q(t) of the model; see DegradationModel.rate_matrix."""
    return model.rate_matrix(t)


def solve_occupancy(model: DegradationModel, t_end: float,
                    grid_step: float) -> OccupancyCurve:
    """Occupancy curve on [0, t_end]; see DegradationModel.occupancy."""
    return model.occupancy(t_end, grid_step)


def interval_transition_matrix(model: DegradationModel, t: float,
                               dt: float) -> np.ndarray:
    """P(t, t+dt); see DegradationModel.transition_matrix."""
    return model.transition_matrix(t, dt)
