"""Nonlinear correction filters: per-coordinate polynomials and a small MLP.

Both map a filtered return vector to the next observed return vector.
The polynomial form fits each output coordinate against the matching
input coordinate by least squares; the MLP is trained by full-batch
gradient descent with hand-rolled backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateDesignError,
    DimensionMismatchError,
    NonFiniteLossError,
    TooFewSamplesError,
)

SERIAL_HEADER = "ssafx-filter v1"


@dataclass(frozen=True, eq=False)
class PolyFilter:
    """Separable polynomial map: out[i] = poly(coeffs[i], in[i]).

    coeffs has one row of degree+1 coefficients (constant term first)
    per coordinate.
    """

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=np.float64))
        if c.shape[1] != self.degree + 1:
            raise ValueError("coeffs must have degree + 1 columns")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionMismatchError(f"expected {self.dim} coordinates, got {x.shape}")
        out = np.zeros(self.dim)
        for power in range(self.degree, -1, -1):
            out = out * x + self.coeffs[:, power]
        return out


class Activation(Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"


def _act(z: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.TANH:
        return np.tanh(z)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _act_deriv(activated: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.TANH:
        return 1.0 - activated * activated
    return activated * (1.0 - activated)


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    """Feedforward net, hidden activation per `activation`, identity output."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching weight/bias lists")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError("bias shape must match weight rows")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("weights must be finite")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError("consecutive layer shapes disagree")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    @classmethod
    def init(
        cls,
        layer_sizes: list[int] | tuple[int, ...],
        activation: Activation = Activation.TANH,
        seed: int | tuple = 0,
    ) -> "MlpNetwork":
        """Seeded init: weights uniform in +-1/sqrt(fan_in), biases zero.

        The recommended hidden depth is 2..9; shallower nets are allowed
        (0 hidden layers gives a plain linear map).
        """
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError("layer_sizes needs input and output dims >= 1")
        rng = np.random.default_rng(seed)
        weights = []
        biases = []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights=tuple(weights), biases=tuple(biases), activation=activation)


def mlp_forward(net: MlpNetwork, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.layer_sizes[0],):
        raise DimensionMismatchError(
            f"expected input of length {net.layer_sizes[0]}, got {x.shape}"
        )
    a = x
    last = len(net.weights) - 1
    for idx, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b
        a = z if idx == last else _act(z, net.activation)
    return a


def _forward_batch(net: MlpNetwork, inputs: np.ndarray):
    """Activations per layer for a (samples x dim) batch; output is linear."""
    acts = [inputs]
    last = len(net.weights) - 1
    with np.errstate(over="ignore", invalid="ignore"):
        for idx, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = acts[-1] @ w.T + b
            acts.append(z if idx == last else _act(z, net.activation))
    return acts


def _loss_and_gradients(net: MlpNetwork, inputs, targets, l2_penalty=0.0):
    """Mean squared error over all output elements, plus its gradients."""
    acts = _forward_batch(net, inputs)
    diff = acts[-1] - targets
    n_el = diff.size
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.sum(diff * diff)) / n_el
    if l2_penalty:
        loss += l2_penalty * sum(float(np.sum(w * w)) for w in net.weights)

    grads_w = [np.zeros_like(w) for w in net.weights]
    grads_b = [np.zeros_like(b) for b in net.biases]
    with np.errstate(over="ignore", invalid="ignore"):
        delta = 2.0 * diff / n_el
        for layer in range(len(net.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ acts[layer]
            grads_b[layer] = delta.sum(axis=0)
            if l2_penalty:
                grads_w[layer] += 2.0 * l2_penalty * net.weights[layer]
            if layer > 0:
                delta = (delta @ net.weights[layer]) * _act_deriv(
                    acts[layer], net.activation
                )
    return loss, grads_w, grads_b


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.1
    seed: int = 0
    l2_penalty: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_penalty < 0.0:
            raise ValueError("l2_penalty must be >= 0")


def mlp_train(
    net: MlpNetwork,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> tuple[MlpNetwork, np.ndarray]:
    """Full-batch gradient descent on MSE; returns (trained net, loss per epoch).

    Deterministic for fixed inputs; raises NonFiniteLossError on divergence.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if inputs.shape[0] != targets.shape[0] or inputs.shape[0] == 0:
        raise ValueError("inputs and targets must be equally many and nonempty")
    if inputs.shape[1] != net.layer_sizes[0] or targets.shape[1] != net.layer_sizes[-1]:
        raise DimensionMismatchError("dataset dims do not match the network")

    weights = [w.copy() for w in net.weights]
    biases = [b.copy() for b in net.biases]
    losses = np.empty(cfg.epochs)
    current = MlpNetwork(tuple(weights), tuple(biases), net.activation)
    for epoch in range(cfg.epochs):
        loss, grads_w, grads_b = _loss_and_gradients(
            current, inputs, targets, cfg.l2_penalty
        )
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"loss diverged at epoch {epoch}")
        losses[epoch] = loss
        with np.errstate(over="ignore", invalid="ignore"):
            weights = [w - cfg.learning_rate * g for w, g in zip(weights, grads_w)]
            biases = [b - cfg.learning_rate * g for b, g in zip(biases, grads_b)]
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise NonFiniteLossError(f"weights diverged at epoch {epoch}")
        current = MlpNetwork(tuple(weights), tuple(biases), net.activation)
    return current, losses


def gradient_check(net: MlpNetwork, x: np.ndarray, target: np.ndarray) -> float:
    """Max relative gap between backprop and central finite differences.

    Steps every weight and bias by 1e-5; gaps between near-zero gradient
    pairs are compared absolutely so roundoff noise does not inflate the
    relative figure.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    _, grads_w, grads_b = _loss_and_gradients(net, x, target)

    step = 1e-5
    worst = 0.0

    def loss_with(weights, biases):
        probe = MlpNetwork(tuple(weights), tuple(biases), net.activation)
        loss, _, _ = _loss_and_gradients(probe, x, target)
        return loss

    for layer in range(len(net.weights)):
        for arr_kind, analytic in (("w", grads_w[layer]), ("b", grads_b[layer])):
            base = net.weights[layer] if arr_kind == "w" else net.biases[layer]
            for idx in np.ndindex(base.shape):
                weights = [w.copy() for w in net.weights]
                biases = [b.copy() for b in net.biases]
                tgt = weights[layer] if arr_kind == "w" else biases[layer]
                orig = tgt[idx]
                tgt[idx] = orig + step
                up = loss_with(weights, biases)
                tgt[idx] = orig - step
                down = loss_with(weights, biases)
                numeric = (up - down) / (2.0 * step)
                a = float(analytic[idx])
                denom = max(abs(a), abs(numeric))
                err = abs(a - numeric) if denom <= 1e-6 else abs(a - numeric) / denom
                worst = max(worst, err)
    return worst


def polyfit(inputs, targets, degree: int) -> PolyFilter:
    """Least-squares separable polynomial fit via normal equations.

    Falls back to a small ridge term when the Gram matrix condition
    estimate exceeds 1e12.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if targets.ndim == 1:
        targets = targets[:, None]
    if inputs.shape != targets.shape:
        raise ValueError("inputs and targets must have identical shape")
    samples, dim = inputs.shape
    if samples < degree + 1:
        raise TooFewSamplesError(f"{samples} samples for degree {degree}")
    if np.all(inputs == inputs[0]):
        raise DegenerateDesignError("all input vectors identical")

    coeffs = np.empty((dim, degree + 1))
    for d in range(dim):
        design = np.vander(inputs[:, d], degree + 1, increasing=True)
        gram = design.T @ design
        rhs = design.T @ targets[:, d]
        if np.linalg.cond(gram) > 1e12:
            ridge = 1e-10 * (np.trace(gram) / (degree + 1) + 1.0)
            gram = gram + ridge * np.eye(degree + 1)
        coeffs[d] = np.linalg.solve(gram, rhs)
    return PolyFilter(degree=degree, coeffs=coeffs)


def nonlinear_forecast(filt: PolyFilter | MlpNetwork, y_now: np.ndarray) -> np.ndarray:
    """Apply a fitted filter to the current return vector."""
    if isinstance(filt, PolyFilter):
        return filt.apply(y_now)
    return mlp_forward(filt, np.asarray(y_now, dtype=np.float64))


def save_filter(filt: PolyFilter | MlpNetwork) -> str:
    """Versioned plain-text serialization at full precision."""
    lines = [SERIAL_HEADER]
    if isinstance(filt, PolyFilter):
        lines.append("kind: poly")
        lines.append(f"degree: {filt.degree}")
        lines.append(f"dim: {filt.dim}")
        for row in filt.coeffs:
            lines.append(" ".join(repr(float(v)) for v in row))
    else:
        lines.append("kind: mlp")
        lines.append(f"activation: {filt.activation.value}")
        lines.append("layers: " + " ".join(str(s) for s in filt.layer_sizes))
        for w, b in zip(filt.weights, filt.biases):
            for row in w:
                lines.append(" ".join(repr(float(v)) for v in row))
            lines.append(" ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"


def load_filter(text: str) -> PolyFilter | MlpNetwork:
    """Inverse of save_filter; round-trips bit-exactly."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIAL_HEADER:
        raise ValueError("unrecognized filter serialization header")
    kind = lines[1].split(":", 1)[1].strip()
    if kind == "poly":
        degree = int(lines[2].split(":", 1)[1])
        dim = int(lines[3].split(":", 1)[1])
        rows = [[float(v) for v in ln.split()] for ln in lines[4 : 4 + dim]]
        return PolyFilter(degree=degree, coeffs=np.array(rows))
    if kind == "mlp":
        activation = Activation(lines[2].split(":", 1)[1].strip())
        sizes = [int(s) for s in lines[3].split(":", 1)[1].split()]
        cursor = 4
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            w_rows = [[float(v) for v in ln.split()] for ln in lines[cursor : cursor + fan_out]]
            cursor += fan_out
            b_row = [float(v) for v in lines[cursor].split()]
            cursor += 1
            weights.append(np.array(w_rows).reshape(fan_out, fan_in))
            biases.append(np.array(b_row))
        return MlpNetwork(tuple(weights), tuple(biases), activation)
    raise ValueError(f"unknown filter kind {kind!r}")
