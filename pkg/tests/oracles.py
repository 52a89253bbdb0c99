"""Independent reference computations used to check the solvers.

Kept deliberately separate from the package: the matrix exponential here
is a plain truncated Taylor series, not a call into the integration path
it is used to validate.
"""

import numpy as np

from pipemdp.env import EnvConfig
from pipemdp.hazards import Family, HazardSpec, HazardTable, TRANSITION_LABELS
from pipemdp.msdm import DegradationModel


def expm_series(a: np.ndarray, term_tol: float = 1e-12) -> np.ndarray:
    """exp(a) by summing the Taylor series until a term drops below tol."""
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, 400):
        term = term @ a / k
        result = result + term
        if np.abs(term).max() < term_tol:
            return result
    raise RuntimeError("matrix exponential series did not converge")


def near_zero_model(initial=None) -> DegradationModel:
    """A model whose rates are numerically zero (1e-300 per transition)."""
    table = HazardTable(
        {lab: HazardSpec.exponential(1e-300) for lab in TRANSITION_LABELS}
    )
    if initial is None:
        initial = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    return DegradationModel(Family.EXPONENTIAL, table, np.asarray(initial, float))


def static_config(**overrides) -> EnvConfig:
    """Environment with frozen degradation: only actions change anything."""
    model = near_zero_model()
    defaults = dict(dynamics=model, prognosis=model)
    defaults.update(overrides)
    return EnvConfig(**defaults)
