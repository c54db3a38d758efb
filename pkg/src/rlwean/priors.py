"""Value reuse from prior computation.

A PriorArtifact is a frozen Q-network or value network from earlier training.
The combined baseline blends the freshly learned value function with the
value recovered from the prior:

    b(s) = (1 - w_t) * V_current(s) + w_t * V_prior(s)

where V_prior is sum_a pi(a|s) Q(s, a) for Q-function priors (discrete
actions only) or the frozen value network's output for value priors, and
w_t is produced by a weaning schedule that decreases over training.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import CompatibilityError, UnsupportedError
from .nets import MlpModel, forward
from .policies import CategoricalPolicy, GaussianPolicy, action_probs

FORMAT_VERSION = 1
_KIND_TO_FILE = {"q_function": "q", "value_function": "v"}
_FILE_TO_KIND = {v: k for k, v in _KIND_TO_FILE.items()}


@dataclass
class WeaningSchedule:
    """Rule producing the prior weight w_t in [0, 1] over training timesteps."""

    kind: str  # "fixed" | "step_decay"
    w0: float
    decrement: float = 0.0
    interval_steps: int = 1

    def __post_init__(self):
        if self.kind not in ("fixed", "step_decay"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.w0 <= 1.0:
            raise ValueError("w0 must lie in [0, 1]")
        if self.decrement < 0.0:
            raise ValueError("decrement must be non-negative")
        if self.kind == "step_decay" and self.interval_steps < 1:
            raise ValueError("interval_steps must be >= 1")


def weaning_weight(schedule: WeaningSchedule, t: int) -> float:
    """w_t: fixed -> w0; step_decay -> max(0, w0 - decrement*floor(t/interval)).

    Computed in decimal so boundary values like 0.5 - 2*0.1 come out exactly
    0.3 instead of drifting in binary."""
    if t < 0:
        raise ValueError("timestep must be non-negative")
    if schedule.kind == "fixed":
        return schedule.w0
    k = t // schedule.interval_steps
    w = Decimal(repr(schedule.w0)) - k * Decimal(repr(schedule.decrement))
    return max(0.0, float(w))


@dataclass
class PriorArtifact:
    """Frozen prior computation plus compatibility metadata."""

    kind: str  # "q_function" | "value_function"
    network: MlpModel
    obs_dim: int
    action_count: int = 0
    source_env_id: str = ""
    source_algorithm: str = ""
    source_seed: int = 0
    created_at: str = ""
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.kind not in _KIND_TO_FILE:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.network.input_dim != self.obs_dim:
            raise CompatibilityError(
                f"network input dim {self.network.input_dim} != obs_dim {self.obs_dim}")
        if self.kind == "q_function":
            if self.network.output_dim != self.action_count:
                raise CompatibilityError(
                    f"q-network outputs {self.network.output_dim} values, "
                    f"expected action_count {self.action_count}")
        elif self.network.output_dim != 1:
            raise CompatibilityError("value network must output a single value")


def check_compatibility(prior: PriorArtifact, obs_dim: int,
                        action_count: int | None = None) -> None:
    """Fail fast on mismatched source/target spaces."""
    if prior.obs_dim != obs_dim:
        raise CompatibilityError(
            f"prior obs_dim {prior.obs_dim} != target obs_dim {obs_dim}")
    if prior.kind == "q_function" and action_count is not None \
            and prior.action_count != action_count:
        raise CompatibilityError(
            f"prior action_count {prior.action_count} != target {action_count}")


def save_artifact(prior: PriorArtifact, path) -> None:
    """Write the artifact as a JSON document with full round-trip decimals."""
    layers = []
    for w, b in zip(prior.network.weights, prior.network.biases):
        layers.append({
            "rows": int(w.shape[0]),
            "cols": int(w.shape[1]),
            "weights": [float(v) for v in w.reshape(-1)],
            "biases": [float(v) for v in b],
        })
    doc = {
        "format_version": prior.format_version,
        "kind": _KIND_TO_FILE[prior.kind],
        "obs_dim": prior.obs_dim,
        "action_count": prior.action_count,
        "activation": "tanh",
        "layers": layers,
        "metadata": {
            "source_env_id": prior.source_env_id,
            "source_algorithm": prior.source_algorithm,
            "source_seed": prior.source_seed,
            "created_at": prior.created_at or time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                                            time.gmtime()),
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_artifact(path) -> PriorArtifact:
    """Load and eagerly validate an artifact file."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("activation") != "tanh":
        raise ValueError(f"unsupported activation {doc.get('activation')!r}")
    if doc.get("kind") not in _FILE_TO_KIND:
        raise ValueError(f"unknown artifact kind {doc.get('kind')!r}")
    weights, biases, dims = [], [], None
    for layer in doc["layers"]:
        rows, cols = layer["rows"], layer["cols"]
        w = np.array(layer["weights"], dtype=np.float64).reshape(rows, cols)
        b = np.array(layer["biases"], dtype=np.float64)
        if b.shape != (rows,):
            raise ValueError("bias length does not match layer rows")
        if dims is None:
            dims = [cols]
        elif dims[-1] != cols:
            raise ValueError("inconsistent layer dimensions")
        dims.append(rows)
        weights.append(w)
        biases.append(b)
    meta = doc.get("metadata", {})
    return PriorArtifact(
        kind=_FILE_TO_KIND[doc["kind"]],
        network=MlpModel(dims, weights, biases),
        obs_dim=int(doc["obs_dim"]),
        action_count=int(doc.get("action_count", 0)),
        source_env_id=meta.get("source_env_id", ""),
        source_algorithm=meta.get("source_algorithm", ""),
        source_seed=int(meta.get("source_seed", 0)),
        created_at=meta.get("created_at", ""),
        format_version=int(doc["format_version"]),
    )


def q_to_value(prior: PriorArtifact, policy, observation: np.ndarray) -> float:
    """V_prior(s) = sum_a pi(a|s) Q(s, a) with the frozen prior Q-network."""
    if prior.kind != "q_function":
        raise ValueError("q_to_value requires a q_function prior")
    if isinstance(policy, GaussianPolicy):
        raise UnsupportedError(
            "Q-to-value conversion is defined for discrete actions only")
    if policy.action_count != prior.action_count:
        raise CompatibilityError(
            f"policy action count {policy.action_count} != prior "
            f"{prior.action_count}")
    probs = action_probs(policy, observation)
    return q_to_value_from_probs(prior, probs, observation)


def q_to_value_from_probs(prior: PriorArtifact, probs: np.ndarray,
                          observation: np.ndarray):
    """Same as q_to_value but with explicit action probabilities (batch ok)."""
    obs = np.asarray(observation, dtype=np.float64)
    if obs.shape[-1] != prior.obs_dim:
        raise CompatibilityError(
            f"observation dim {obs.shape[-1]} != prior obs_dim {prior.obs_dim}")
    q = forward(prior.network, obs)
    out = np.sum(np.asarray(probs) * q, axis=-1)
    return float(out) if obs.ndim == 1 else out


def prior_value(prior: PriorArtifact, observation: np.ndarray):
    """Frozen value network's scalar output (value-to-value passthrough)."""
    if prior.kind != "value_function":
        raise ValueError("prior_value requires a value_function prior")
    obs = np.asarray(observation, dtype=np.float64)
    if obs.shape[-1] != prior.obs_dim:
        raise CompatibilityError(
            f"observation dim {obs.shape[-1]} != prior obs_dim {prior.obs_dim}")
    out = forward(prior.network, obs)[..., 0]
    return float(out) if obs.ndim == 1 else out


@dataclass
class BaselineSpec:
    """Prior (optional), weaning schedule and the learned value network."""

    schedule: WeaningSchedule
    current_value_network: MlpModel
    prior: PriorArtifact | None = None


def effective_weight(spec: BaselineSpec, t: int) -> float:
    """w_t, forced to 0 when no prior is present (tabula rasa)."""
    if spec.prior is None:
        return 0.0
    return weaning_weight(spec.schedule, t)


def combined_baseline(spec: BaselineSpec, policy, observation: np.ndarray,
                      t: int) -> float:
    """b(s_t) = (1 - w_t) V_current(s_t) + w_t V_prior(s_t)."""
    v_current = float(forward(spec.current_value_network, observation)[..., 0])
    w = effective_weight(spec, t)
    if w == 0.0:
        return v_current
    if spec.prior.kind == "q_function":
        v_prior = q_to_value(spec.prior, policy, observation)
    else:
        v_prior = prior_value(spec.prior, observation)
    return (1.0 - w) * v_current + w * v_prior
