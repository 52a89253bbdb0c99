"""Parametric hazard rates and calibrated transition tables.

A pipe segment degrades through six severity states: levels 1 (pristine)
to 5 (worst damage) plus a functional-failure state F.  Severity can only
move forward along the chain 1 -> 2 -> 3 -> 4 -> 5, and every level can
jump directly to F, giving nine allowed transitions.  Each transition
carries a time-dependent hazard rate lambda(t) in 1/year, drawn from one
of three parametric families:

    exponential   lambda(t) = epsilon
    gompertz      lambda(t) = alpha * beta * exp(beta * t)
    weibull       lambda(t) = (rho / eta) * (t / eta)**(rho - 1)

The tables shipped in this module are calibrated for the CMW cohort
(concrete pipes carrying mixed and waste content).  Several calibrated
rates sit at ~1e-18: they are numerical zeros produced by the fit and are
kept verbatim rather than clamped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, SingularityError

STATES = ("1", "2", "3", "4", "5", "F")
N_STATES = len(STATES)
FAILED = 5  # index of the absorbing failure state

# The nine allowed transitions, as (source, destination) state indices:
# four severity progressions plus a failure edge from every level.
TRANSITIONS = (
    (0, 1), (1, 2), (2, 3), (3, 4),
    (0, 5), (1, 5), (2, 5), (3, 5), (4, 5),
)

TRANSITION_LABELS = tuple(f"{STATES[i]}->{STATES[j]}" for i, j in TRANSITIONS)


class Family(str, Enum):
    """Hazard-rate family of a degradation model."""

    EXPONENTIAL = "exponential"
    GOMPERTZ = "gompertz"
    WEIBULL = "weibull"


_PARAM_NAMES = {
    Family.EXPONENTIAL: ("epsilon",),
    Family.GOMPERTZ: ("alpha", "beta"),
    Family.WEIBULL: ("eta", "rho"),
}


def parse_transition(label: str) -> tuple[int, int]:
    """Turn a label like ``"2->F"`` into (source, destination) indices."""
    try:
        src, dst = label.split("->")
        pair = (STATES.index(src), STATES.index(dst))
    except ValueError as exc:
        raise FormatError(f"bad transition label {label!r}") from exc
    if pair not in TRANSITIONS:
        raise FormatError(f"transition {label!r} is not an allowed edge")
    return pair


@dataclass(frozen=True)
class HazardSpec:
    """One transition's hazard family plus its parameters.

    Parameters by family: ``(epsilon,)`` for exponential, ``(alpha, beta)``
    for gompertz, ``(eta, rho)`` for weibull with eta the scale in years
    and rho the dimensionless shape.  All parameters must be finite and
    strictly positive; rates are in 1/year.
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        expected = len(_PARAM_NAMES[self.family])
        if len(self.params) != expected:
            raise FormatError(
                f"{self.family.value} hazard takes {expected} parameter(s), "
                f"got {len(self.params)}"
            )
        for name, p in zip(_PARAM_NAMES[self.family], self.params):
            if not math.isfinite(p) or p <= 0.0:
                raise FormatError(
                    f"{self.family.value} parameter {name}={p!r} must be "
                    "finite and strictly positive"
                )

    @classmethod
    def exponential(cls, epsilon: float) -> "HazardSpec":
        return cls(Family.EXPONENTIAL, (epsilon,))

    @classmethod
    def gompertz(cls, alpha: float, beta: float) -> "HazardSpec":
        return cls(Family.GOMPERTZ, (alpha, beta))

    @classmethod
    def weibull(cls, eta: float, rho: float) -> "HazardSpec":
        return cls(Family.WEIBULL, (eta, rho))

    def rate(self, t: float) -> float:
        """Hazard rate at age ``t`` years.  See :func:`eval_hazard`."""
        if t < 0.0:
            raise DomainError(f"hazard rate undefined for negative age t={t}")
        if self.family is Family.EXPONENTIAL:
            return self.params[0]
        if self.family is Family.GOMPERTZ:
            alpha, beta = self.params
            return alpha * beta * math.exp(beta * t)
        eta, rho = self.params
        if t == 0.0:
            if rho < 1.0:
                raise SingularityError(
                    f"weibull hazard with shape rho={rho} < 1 diverges at t=0"
                )
            # limit value: t**(rho-1) -> 0 for rho > 1, constant for rho == 1
            return rho / eta if rho == 1.0 else 0.0
        return (rho / eta) * (t / eta) ** (rho - 1.0)


def eval_hazard(spec: HazardSpec, t: float) -> float:
    """Evaluate a hazard rate (1/year) at age ``t`` (years).

    Raises DomainError for t < 0 and SingularityError for a weibull
    hazard with shape < 1 evaluated exactly at t = 0.
    """
    return spec.rate(t)


@dataclass(frozen=True)
class HazardTable:
    """Hazard specs for exactly the nine allowed transitions."""

    entries: dict[str, HazardSpec]

    def __post_init__(self):
        got = set(self.entries)
        expected = set(TRANSITION_LABELS)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise FormatError(
                f"hazard table must cover exactly the nine transitions; "
                f"missing={missing} extra={extra}"
            )

    def spec(self, src: int, dst: int) -> HazardSpec:
        return self.entries[f"{STATES[src]}->{STATES[dst]}"]

    def rates(self, t: float) -> np.ndarray:
        """All nine transition rates at age ``t``, ordered as TRANSITIONS."""
        return np.array([self.entries[lab].rate(t) for lab in TRANSITION_LABELS])


# Calibrated CMW-cohort parameters.  Weibull entries are (eta, rho) with
# eta the scale in years; the tiny shapes on the failure edges encode
# transitions that are effectively switched off by the calibration.
_CMW_EXPONENTIAL = {
    "1->2": 2.4e-02, "2->3": 9.4e-03, "3->4": 5.7e-03, "4->5": 1.8e-02,
    "1->F": 3.0e-18, "2->F": 6.0e-04, "3->F": 1.0e-18, "4->F": 1.0e-18,
    "5->F": 1.0e-18,
}
_CMW_GOMPERTZ = {
    "1->2": (2.3e+00, 8.4e-03), "2->3": (2.1e-02, 5.5e-02),
    "3->4": (3.3e+00, 2.8e-03), "4->5": (2.4e+00, 8.7e-03),
    "1->F": (1.4e-01, 3.1e-04), "2->F": (8.8e-01, 7.0e-19),
    "3->F": (2.2e-03, 4.5e-02), "4->F": (9.8e-05, 8.6e-03),
    "5->F": (7.0e-19, 3.8e-01),
}
_CMW_WEIBULL = {
    "1->2": (4.4e+01, 1.3e+00), "2->3": (7.7e+01, 2.9e+00),
    "3->4": (8.1e+01, 3.5e+00), "4->5": (5.5e+01, 7.0e+00),
    "1->F": (4.6e+01, 4.1e-06), "2->F": (4.6e+01, 2.7e-04),
    "3->F": (4.7e+01, 3.0e-05), "4->F": (4.5e+01, 1.1e-03),
    "5->F": (5.9e+01, 1.7e+00),
}

# Initial severity distribution per family (fraction of segments born at
# each state); columns are renormalized to sum to exactly 1.
_CMW_INITIAL = {
    Family.EXPONENTIAL: (9.89e-01, 1.26e-17, 3.70e-23, 1.11e-02, 2.11e-22, 3.87e-22),
    Family.GOMPERTZ: (9.58e-01, 0.00e+00, 4.00e-02, 1.61e-03, 2.00e-15, 1.56e-04),
    Family.WEIBULL: (9.23e-01, 2.59e-02, 3.10e-02, 1.13e-02, 2.07e-03, 6.40e-03),
}


def _cmw_table(family: Family) -> HazardTable:
    if family is Family.EXPONENTIAL:
        entries = {lab: HazardSpec.exponential(eps)
                   for lab, eps in _CMW_EXPONENTIAL.items()}
    elif family is Family.GOMPERTZ:
        entries = {lab: HazardSpec.gompertz(a, b)
                   for lab, (a, b) in _CMW_GOMPERTZ.items()}
    else:
        entries = {lab: HazardSpec.weibull(eta, rho)
                   for lab, (eta, rho) in _CMW_WEIBULL.items()}
    return HazardTable(entries)


def cmw_initial_state(family: Family) -> np.ndarray:
    """Initial severity distribution for the CMW cohort, normalized."""
    s0 = np.array(_CMW_INITIAL[Family(family)], dtype=float)
    s0 = s0 / s0.sum()
    s0.flags.writeable = False
    return s0


def cmw_hazard_table(family: Family) -> HazardTable:
    """Calibrated hazard table for the CMW cohort."""
    return _cmw_table(Family(family))


def builtin_cmw_tables() -> dict[Family, tuple[HazardTable, np.ndarray]]:
    """All three calibrated (hazard table, initial distribution) pairs."""
    return {fam: (_cmw_table(fam), cmw_initial_state(fam)) for fam in Family}


def load_hazard_file(path: str | Path) -> tuple[Family, HazardTable, np.ndarray]:
    """Read a hazard table plus initial distribution from JSON.

    Expected shape::

        {"family": "weibull",
         "transitions": {"1->2": {"eta": 44.0, "rho": 1.3}, ...},
         "S0": [0.923, ...]}

    Parameter keys per family: ``epsilon`` | ``alpha``,``beta`` |
    ``eta``,``rho``.  Raises FormatError on any structural problem.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read hazard file {path}: {exc}") from exc
    try:
        family = Family(raw["family"])
        transitions = raw["transitions"]
        s0 = np.array(raw["S0"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"hazard file {path} is missing or has bad keys: {exc}") from exc
    if s0.shape != (N_STATES,) or (s0 < 0).any() or s0.sum() <= 0:
        raise FormatError("S0 must be six nonnegative numbers with positive sum")
    names = _PARAM_NAMES[family]
    entries = {}
    for label, params in transitions.items():
        parse_transition(label)
        try:
            entries[label] = HazardSpec(family, tuple(params[n] for n in names))
        except (KeyError, TypeError) as exc:
            raise FormatError(
                f"transition {label!r} needs parameters {names}"
            ) from exc
    table = HazardTable(entries)
    s0 = s0 / s0.sum()
    s0.flags.writeable = False
    return family, table, s0


def dump_hazard_file(path: str | Path, family: Family, table: HazardTable,
                     initial: np.ndarray) -> None:
    """Write a hazard table in the format read by :func:`load_hazard_file`."""
    names = _PARAM_NAMES[Family(family)]
    doc = {
        "family": Family(family).value,
        "transitions": {
            lab: dict(zip(names, table.entries[lab].params))
            for lab in TRANSITION_LABELS
        },
        "S0": [float(x) for x in initial],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
