"""Maintenance policies: three heuristics plus neural-policy inference.

Heuristics decide from the observation alone (plus, for the scheduled
policy, the time since the last intervention, which the episode driver
tracks).  Neural policies are plain feed-forward networks loaded from a
portable ``.policy.json`` file and evaluated greedily.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Action
from .errors import FormatError, ShapeError

# observation layout: [age, h1..h5, hF, S1..S5, SF]
OBS_DIM = 13
_H4 = 4
_H5 = 5
_HF = 6


def cbm_decide(obs: np.ndarray, age_limit: float = 70.0,
               h4_threshold: float = 0.1, h5_threshold: float = 0.05) -> Action:
    """Condition-based rule: replace old or failed pipes, repair heavy
    damage, otherwise wait.  Replacement takes precedence."""
    if obs[0] >= age_limit or obs[_HF] > 0.0:
        return Action.REPLACE
    if obs[_H4] >= h4_threshold or obs[_H5] >= h5_threshold:
        return Action.MAINTAIN
    return Action.DO_NOTHING


def schm_decide(obs: np.ndarray, years_since_intervention: float,
                period: float = 10.0) -> Action:
    """Scheduled rule: replace failed pipes, otherwise maintain once the
    period has elapsed since the last intervention (a pipe that has never
    been touched is due immediately)."""
    if obs[_HF] > 0.0:
        return Action.REPLACE
    if years_since_intervention >= period:
        return Action.MAINTAIN
    return Action.DO_NOTHING


def rm_decide(obs: np.ndarray) -> Action:
    """Reactive rule: replace on failure, otherwise do nothing.  Never
    maintains."""
    return Action.REPLACE if obs[_HF] > 0.0 else Action.DO_NOTHING


_ACTIVATIONS = {
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "tanh": np.tanh,
    "relu": lambda x: np.maximum(x, 0.0),
}


@dataclass
class NeuralPolicyWeights:
    """Feed-forward network weights plus observation normalization.

    ``weights[i]`` has shape (out, in); the forward pass applies the
    activation after every layer except the last, whose raw scores are
    ranked by argmax.  Observations are divided elementwise by
    ``obs_divisor`` before entering the network.  Everything is float32
    so decisions are bit-reproducible across implementations.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "sigmoid"
    obs_divisor: np.ndarray = field(
        default_factory=lambda: default_obs_divisor()
    )

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise FormatError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need matching, nonempty weight and bias lists")
        self.weights = [np.asarray(w, dtype=np.float32) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float32) for b in self.biases]
        self.obs_divisor = np.asarray(self.obs_divisor, dtype=np.float32)
        in_dim = self.obs_divisor.shape[0]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {k}: weight {w.shape} / bias {b.shape}")
            if w.shape[1] != in_dim:
                raise ShapeError(
                    f"layer {k} expects input of size {w.shape[1]}, got {in_dim}"
                )
            in_dim = w.shape[0]

    @property
    def n_actions(self) -> int:
        return self.weights[-1].shape[0]

    def scores(self, obs: np.ndarray) -> np.ndarray:
        """Raw output scores for one observation (float32 throughout)."""
        act = _ACTIVATIONS[self.activation]
        x = np.asarray(obs, dtype=np.float32) / self.obs_divisor
        if x.shape != self.obs_divisor.shape:
            raise ShapeError(f"observation shape {x.shape} does not match network")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = act(w @ x + b)
        return self.weights[-1] @ x + self.biases[-1]


def default_obs_divisor(obs_dim: int = OBS_DIM) -> np.ndarray:
    """Age is scaled down by 100; the other entries are already in [0, 1]."""
    d = np.ones(obs_dim, dtype=np.float32)
    d[0] = 100.0
    return d


def zero_policy_weights(hidden: tuple[int, ...] = (32, 32, 32),
                        obs_dim: int = OBS_DIM,
                        n_actions: int = 3) -> NeuralPolicyWeights:
    """All-zero network; every observation scores the actions equally."""
    dims = (obs_dim, *hidden, n_actions)
    return NeuralPolicyWeights(
        weights=[np.zeros((o, i), dtype=np.float32) for i, o in zip(dims, dims[1:])],
        biases=[np.zeros(o, dtype=np.float32) for o in dims[1:]],
        obs_divisor=default_obs_divisor(obs_dim),
    )


def neural_decide(obs: np.ndarray, weights: NeuralPolicyWeights) -> Action:
    """Greedy action: argmax of the network scores, ties to the lowest
    action index."""
    return Action(int(np.argmax(weights.scores(obs))))


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.asarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode(text: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        flat = np.frombuffer(base64.b64decode(text, validate=True), dtype="<f4")
    except (binascii.Error, ValueError) as exc:
        raise FormatError(f"corrupt weight payload: {exc}") from exc
    if flat.size != int(np.prod(shape)):
        raise FormatError(
            f"weight payload holds {flat.size} floats, expected {np.prod(shape)}"
        )
    return flat.reshape(shape).copy()


def save_policy_weights(weights: NeuralPolicyWeights, path: str | Path) -> None:
    """Write a ``.policy.json`` file: JSON header plus base64 row-major
    float32 matrices, readable without any tensor library."""
    doc = {
        "format": "pipemdp-policy",
        "version": 1,
        "activation": weights.activation,
        "obs_divisor": [float(x) for x in weights.obs_divisor],
        "layers": [
            {
                "rows": int(w.shape[0]),
                "cols": int(w.shape[1]),
                "weights": _encode(w),
                "bias": _encode(b),
            }
            for w, b in zip(weights.weights, weights.biases)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_policy_weights(path: str | Path) -> NeuralPolicyWeights:
    """Read a ``.policy.json`` file.  Raises FormatError on corrupt files
    and ShapeError when the layer dimensions do not compose."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read policy file {path}: {exc}") from exc
    try:
        if doc["format"] != "pipemdp-policy":
            raise FormatError(f"not a policy file: {doc.get('format')!r}")
        layers = doc["layers"]
        ws = [_decode(l["weights"], (l["rows"], l["cols"])) for l in layers]
        bs = [_decode(l["bias"], (l["rows"],)) for l in layers]
        return NeuralPolicyWeights(
            weights=ws,
            biases=bs,
            activation=doc["activation"],
            obs_divisor=np.array(doc["obs_divisor"], dtype=np.float32),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"policy file {path} is malformed: {exc}") from exc


class Policy:
    """Decision rule: observation (+ intervention clock) -> action.

    Immutable and stateless; the episode driver owns the clock and resets
    it whenever the executed action was maintain or replace.
    """

    name = "policy"

    def decide(self, obs: np.ndarray,
               years_since_intervention: float = math.inf) -> Action:
        raise NotImplementedError


class CBMPolicy(Policy):
    def __init__(self, age_limit: float = 70.0, h4_threshold: float = 0.1,
                 h5_threshold: float = 0.05):
        self.name = "cbm"
        self.age_limit = age_limit
        self.h4_threshold = h4_threshold
        self.h5_threshold = h5_threshold

    def decide(self, obs, years_since_intervention=math.inf):
        return cbm_decide(obs, self.age_limit, self.h4_threshold, self.h5_threshold)


class SchMPolicy(Policy):
    def __init__(self, period: float = 10.0):
        self.name = "schm"
        self.period = period

    def decide(self, obs, years_since_intervention=math.inf):
        return schm_decide(obs, years_since_intervention, self.period)


class RMPolicy(Policy):
    name = "rm"

    def decide(self, obs, years_since_intervention=math.inf):
        return rm_decide(obs)


class NeuralPolicy(Policy):
    def __init__(self, weights: NeuralPolicyWeights, name: str = "neural"):
        self.name = name
        self.weights = weights

    @classmethod
    def from_file(cls, path: str | Path) -> "NeuralPolicy":
        return cls(load_policy_weights(path), name=Path(path).stem.split(".")[0])

    def decide(self, obs, years_since_intervention=math.inf):
        return neural_decide(obs, self.weights)
