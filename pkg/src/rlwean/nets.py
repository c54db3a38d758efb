"""Small tanh MLPs with hand-written reverse-mode gradients and Adam.

All networks in this package are feed-forward nets with tanh hidden
activations and an identity output layer. Forward and backward accept
either a single input vector or a batch (N, d); batched backward returns
gradients summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MlpModel:
    """Feed-forward network: weights[l] has shape (out_dim, in_dim)."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class GradientBuffer:
    """Parameter gradients, shape-congruent with an MlpModel."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scale(self, c: float) -> None:
        for dw in self.d_weights:
            dw *= c
        for db in self.d_biases:
            db *= c

    def global_norm(self) -> float:
        total = 0.0
        for dw in self.d_weights:
            total += float(np.sum(dw * dw))
        for db in self.d_biases:
            total += float(np.sum(db * db))
        return float(np.sqrt(total))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.d_weights + self.d_biases)


def init_mlp(layer_dims: list[int], rng: np.random.Generator,
             output_scale: float = 1.0) -> MlpModel:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) init; output layer rescaled."""
    if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
        raise ValueError(f"invalid layer dims {layer_dims}")
    weights, biases = [], []
    n_layers = len(layer_dims) - 1
    for l in range(n_layers):
        fan_in = layer_dims[l]
        bound = np.sqrt(1.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(layer_dims[l + 1], fan_in))
        b = rng.uniform(-bound, bound, size=layer_dims[l + 1])
        if l == n_layers - 1:
            w *= output_scale
            b *= output_scale
        weights.append(w)
        biases.append(b)
    return MlpModel(list(layer_dims), weights, biases)


def _forward_cached(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    """Return post-activation values per layer, activations[0] = input."""
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if l != last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a vector (d,) or a batch (N, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ValueError(
            f"input dim {x.shape[-1]} != network input dim {model.input_dim}")
    return _forward_cached(model, x)[-1]


def backward(model: MlpModel, x: np.ndarray,
             output_gradient: np.ndarray) -> GradientBuffer:
    """Exact gradients of sum(output * output_gradient) w.r.t. parameters.

    For batched inputs the gradient is summed over the batch, so pre-scaling
    output_gradient by 1/N yields a batch-mean gradient.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(output_gradient, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
        g = g[None, :]
    if x.shape[-1] != model.input_dim or g.shape[-1] != model.output_dim:
        raise ValueError("shape mismatch between input/output_gradient and model")
    if x.shape[0] != g.shape[0]:
        raise ValueError("batch size mismatch between input and output_gradient")

    acts = _forward_cached(model, x)
    d_weights = [np.empty_like(w) for w in model.weights]
    d_biases = [np.empty_like(b) for b in model.biases]
    delta = g
    for l in range(len(model.weights) - 1, -1, -1):
        d_weights[l][:] = delta.T @ acts[l]
        d_biases[l][:] = delta.sum(axis=0)
        if l > 0:
            # acts[l] is post-tanh; d tanh(z)/dz = 1 - tanh(z)^2
            delta = (delta @ model.weights[l]) * (1.0 - acts[l] ** 2)
    return GradientBuffer(d_weights, d_biases)


def zero_grads(model: MlpModel) -> GradientBuffer:
    return GradientBuffer([np.zeros_like(w) for w in model.weights],
                          [np.zeros_like(b) for b in model.biases])


def clip_grad_norm(grads: GradientBuffer, max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most max_norm."""
    norm = grads.global_norm()
    if norm > max_norm > 0.0:
        grads.scale(max_norm / norm)
    return norm


@dataclass
class AdamState:
    """Adam optimizer state with bias correction."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    kind: str = "adam"
    first_moment: GradientBuffer | None = field(default=None)
    second_moment: GradientBuffer | None = field(default=None)


def init_adam(model: MlpModel, learning_rate: float) -> AdamState:
    return AdamState(learning_rate=learning_rate,
                     first_moment=zero_grads(model),
                     second_moment=zero_grads(model))


def adam_update(model: MlpModel, state: AdamState, grads: GradientBuffer) -> None:
    """One Adam step, in place. Rejects non-finite gradients untouched."""
    if not grads.is_finite():
        raise FloatingPointError("non-finite gradient entries")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    params = model.weights + model.biases
    gs = grads.d_weights + grads.d_biases
    ms = state.first_moment.d_weights + state.first_moment.d_biases
    vs = state.second_moment.d_weights + state.second_moment.d_biases
    for p, g, m, v in zip(params, gs, ms, vs):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
