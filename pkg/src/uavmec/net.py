"""Fully connected value network with hand-rolled backpropagation.

Maps an encoded world state to one Q-value per action. Hidden layers use a
rectifier, the output layer is linear, and updates are plain gradient descent.
Only the output of the action actually taken receives loss gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GradientSet:
    """Partial derivatives of the batch loss, shape-congruent with the network."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def batch_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Half mean squared error: sum((target - pred)^2) / (2K)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"batch shapes differ: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    return float(np.sum((target - pred) ** 2) / (2.0 * pred.shape[0]))


class ValueNet:
    """An MLP whose parameters are plain float64 arrays.

    ``layer_sizes`` lists node counts input -> hidden... -> output. Weights are
    initialized uniform in +-sqrt(6 / (fan_in + fan_out)), biases at zero; pass
    rng=None for an all-zero network.
    """

    def __init__(self, layer_sizes: list[int], rng: np.random.Generator | None):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError(f"invalid layer sizes {layer_sizes}")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            if rng is None:
                w = np.zeros((fan_out, fan_in))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def _forward_cached(self, X: np.ndarray):
        acts = [X]
        zs = []
        a = X
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            zs.append(z)
            a = z if l == last else np.maximum(z, 0.0)
            acts.append(a)
        return acts, zs

    def forward_batch(self, states) -> np.ndarray:
        X = np.asarray(states, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"expected batch of shape (K, {self.in_dim}), got {X.shape}")
        acts, _ = self._forward_cached(X)
        return acts[-1]

    def forward(self, state) -> np.ndarray:
        x = np.asarray(state, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.in_dim:
            raise ValueError(f"expected state of length {self.in_dim}, got shape {x.shape}")
        return self.forward_batch(x[None, :])[0]

    def backward(self, states, action_ids, targets) -> GradientSet:
        """Exact gradients of batch_loss over the taken-action outputs."""
        X = np.asarray(states, dtype=float)
        actions = np.asarray(action_ids, dtype=int)
        t = np.asarray(targets, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"expected batch of shape (K, {self.in_dim}), got {X.shape}")
        if actions.shape != (X.shape[0],) or t.shape != (X.shape[0],):
            raise ValueError("states, action_ids and targets must share batch length")
        k = X.shape[0]
        acts, zs = self._forward_cached(X)
        q = acts[-1]
        rows = np.arange(k)
        dz = np.zeros_like(q)
        dz[rows, actions] = (q[rows, actions] - t) / k
        dws: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        dbs: list[np.ndarray] = [None] * len(self.biases)  # type: ignore[list-item]
        for l in reversed(range(len(self.weights))):
            dws[l] = dz.T @ acts[l]
            dbs[l] = dz.sum(axis=0)
            if l > 0:
                dz = (dz @ self.weights[l]) * (zs[l - 1] > 0.0)
        return GradientSet(dws, dbs)

    def apply_gradients(self, grads: GradientSet, learning_rate: float) -> None:
        """phi <- phi - lambda * grad, elementwise."""
        for w, dw in zip(self.weights, grads.weights):
            w -= learning_rate * dw
        for b, db in zip(self.biases, grads.biases):
            b -= learning_rate * db

    def sync_from(self, other: "ValueNet") -> None:
        """Overwrite this network's parameters with an exact copy of other's."""
        if other.layer_sizes != self.layer_sizes:
            raise ValueError(f"layer sizes differ: {self.layer_sizes} vs {other.layer_sizes}")
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def copy(self) -> "ValueNet":
        dup = ValueNet(self.layer_sizes, rng=None)
        dup.sync_from(self)
        return dup

    # -- checkpointing -----------------------------------------------------
    # Text layout: a "valuenet <sizes...>" header line, then per layer one
    # "W<l> ..." line (row-major weights) and one "b<l> ..." line, all floats
    # printed with repr so the round trip is bit exact.

    def param_lines(self) -> list[str]:
        lines = [f"valuenet {' '.join(str(s) for s in self.layer_sizes)}"]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"W{l} " + " ".join(repr(float(v)) for v in w.ravel()))
            lines.append(f"b{l} " + " ".join(repr(float(v)) for v in b))
        return lines

    @classmethod
    def from_param_lines(cls, lines: list[str]) -> "ValueNet":
        head = lines[0].split()
        if head[0] != "valuenet":
            raise ValueError(f"not a value-net checkpoint (header {lines[0]!r})")
        sizes = [int(s) for s in head[1:]]
        net = cls(sizes, rng=None)
        pos = 1
        for l, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            wtok = lines[pos].split()
            btok = lines[pos + 1].split()
            if wtok[0] != f"W{l}" or btok[0] != f"b{l}":
                raise ValueError(f"malformed checkpoint near line {pos + 1}")
            net.weights[l] = np.array([float(v) for v in wtok[1:]]).reshape(fan_out, fan_in)
            net.biases[l] = np.array([float(v) for v in btok[1:]])
            pos += 2
        return net

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.param_lines()) + "\n")

    @classmethod
    def load(cls, path: str) -> "ValueNet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_param_lines(fh.read().splitlines())
