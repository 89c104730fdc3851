"""Layered networks and learning by the generalized delta rule.

Layers apply v_l = g_l(T^(l) [v_{l-1}; 1]); the constant appended unit
embeds the bias in the weight matrix, so there is exactly one kind of
learnable parameter. Error signals travel backwards through each layer's
transpose, giving exact gradients for batch or stochastic descent with
optional weight decay. Recurrent Euler dynamics unroll into deep networks
whose layers share one weight matrix; their shared gradient is the sum of
the per-layer gradients.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .analog_dynamics import IntegratorConfig
from .mean_field import (
    ActivationFunction,
    activation_by_name,
    identity_activation,
    mixed_activation,
)


def with_bias(v: np.ndarray) -> np.ndarray:
    """Append the constant unit 1 to an activation vector."""
    return np.concatenate([v, [1.0]])


@dataclass
class LayeredNetwork:
    """Feed-forward weights, one activation per layer, optional sharing.

    Layer l has shape (width_l, width_{l-1} + 1); the last column is the
    bias. Layers listed together in a shared group hold bit-identical
    values and are updated as a single parameter matrix.
    """

    weights: List[np.ndarray]
    activations: List[ActivationFunction]
    shared_groups: List[List[int]] = field(default_factory=list)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        if not self.weights:
            raise ValueError("a network needs at least one layer")
        if len(self.activations) != len(self.weights):
            raise ValueError("need exactly one activation per layer")
        for l, w in enumerate(self.weights):
            if w.ndim != 2:
                raise ValueError(f"layer {l} weights must be a matrix")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {l} weights contain non-finite entries")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0] + 1:
                raise ValueError(
                    f"layer {l} expects {w.shape[1] - 1} inputs but layer "
                    f"{l - 1} provides {self.weights[l - 1].shape[0]}")
        seen = set()
        for group in self.shared_groups:
            if len(group) < 2:
                raise ValueError("a shared group needs at least two layers")
            for l in group:
                if not 0 <= l < len(self.weights):
                    raise ValueError(f"shared group references unknown layer {l}")
                if l in seen:
                    raise ValueError(f"layer {l} appears in more than one shared group")
                seen.add(l)
            first = self.weights[group[0]]
            for l in group[1:]:
                if self.weights[l].shape != first.shape or not np.array_equal(
                        self.weights[l], first):
                    raise ValueError("shared layers must hold bit-identical weights")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[1] - 1

    @property
    def output_width(self) -> int:
        return self.weights[-1].shape[0]

    def clone(self) -> "LayeredNetwork":
        return LayeredNetwork(
            weights=[w.copy() for w in self.weights],
            activations=list(self.activations),
            shared_groups=[list(g) for g in self.shared_groups])


@dataclass(frozen=True)
class ForwardTrace:
    """Net inputs and activations of one pass; vs[0] is the input vector."""

    us: List[np.ndarray]
    vs: List[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.vs[-1]


@dataclass(frozen=True)
class BackpropState:
    deltas: List[np.ndarray]
    grads: List[np.ndarray]


@dataclass(frozen=True)
class TrainingBatch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.atleast_2d(np.asarray(self.inputs, dtype=np.float64)))
        object.__setattr__(self, "targets", np.atleast_2d(np.asarray(self.targets, dtype=np.float64)))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must pair up one to one")
        if self.inputs.shape[0] == 0:
            raise ValueError("batch must be nonempty")

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainingConfig:
    eta: float
    lam: float = 0.0
    batch_mode: str = "full_batch"
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.eta > 0.0):
            raise ValueError("eta must be positive")
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if self.batch_mode not in ("full_batch", "stochastic"):
            raise ValueError("batch_mode must be 'full_batch' or 'stochastic'")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


def forward(net: LayeredNetwork, x) -> ForwardTrace:
    """Apply each layer in succession: u_l = T^(l) [v_{l-1}; 1], v_l = g(u_l)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_width,):
        raise ValueError(f"expected input of width {net.input_width}, got {x.shape}")
    us, vs = [], [x]
    v = x
    for w, act in zip(net.weights, net.activations):
        u = w @ with_bias(v)
        v = act.g(u)
        us.append(u)
        vs.append(v)
    return ForwardTrace(us=us, vs=vs)


def _distinct_matrices(net: LayeredNetwork):
    """Indices of one representative layer per parameter matrix."""
    grouped = {l for group in net.shared_groups for l in group}
    reps = [l for l in range(net.depth) if l not in grouped]
    reps.extend(group[0] for group in net.shared_groups)
    return reps


def loss(net: LayeredNetwork, batch: TrainingBatch, lam: float = 0.0) -> float:
    """Sum of squared-error halves, plus (lam/2) sum of squared weights.

    Each shared parameter matrix is counted once in the decay term.
    """
    total = 0.0
    for x, y in zip(batch.inputs, batch.targets):
        diff = forward(net, x).output - y
        total += 0.5 * float(diff @ diff)
    if lam > 0.0:
        total += 0.5 * lam * sum(float(np.sum(net.weights[l] ** 2))
                                 for l in _distinct_matrices(net))
    return total


def _apply_backward(act: ActivationFunction, u: np.ndarray,
                    upstream: np.ndarray) -> np.ndarray:
    if act.jacobian is not None:
        return act.jacobian(u) @ upstream
    return act.g_prime(u) * upstream


def backprop(net: LayeredNetwork, x, y) -> BackpropState:
    """Exact gradients of the pattern error 1/2 ||v_L - y||^2.

    The output delta is the error weighted by the activation derivative;
    earlier deltas follow by multiplying with each layer's transposed
    weights, bias column excluded (the constant unit has no upstream).
    Gradients are the outer products delta_l x [v_{l-1}; 1].
    """
    y = np.asarray(y, dtype=np.float64)
    trace = forward(net, x)
    if y.shape != trace.output.shape:
        raise ValueError(f"target shape {y.shape} does not match output "
                         f"{trace.output.shape}")
    depth = net.depth
    deltas: List[Optional[np.ndarray]] = [None] * depth
    deltas[-1] = _apply_backward(net.activations[-1], trace.us[-1],
                                 trace.output - y)
    for l in range(depth - 1, 0, -1):
        upstream = net.weights[l][:, :-1].T @ deltas[l]
        deltas[l - 1] = _apply_backward(net.activations[l - 1],
                                        trace.us[l - 1], upstream)
    grads = [np.outer(deltas[l], with_bias(trace.vs[l])) for l in range(depth)]
    return BackpropState(deltas=deltas, grads=grads)


def batch_gradients(net: LayeredNetwork, batch: TrainingBatch) -> List[np.ndarray]:
    """Per-layer gradients summed over patterns in ascending index order."""
    total = [np.zeros_like(w) for w in net.weights]
    for x, y in zip(batch.inputs, batch.targets):
        for acc, g in zip(total, backprop(net, x, y).grads):
            acc += g
    return total


def apply_update(net: LayeredNetwork, grads: List[np.ndarray],
                 cfg: TrainingConfig) -> LayeredNetwork:
    """One descent step T <- T - eta (grad + lam T) per parameter matrix.

    Layers of a shared group receive the sum of their members' gradients
    and the identical resulting matrix, so sharing is preserved exactly.
    """
    if len(grads) != net.depth:
        raise ValueError("need one gradient per layer")
    for w, g in zip(net.weights, grads):
        if g.shape != w.shape:
            raise ValueError("gradient shapes must match the layer weights")
    new_weights = [w - cfg.eta * (g + cfg.lam * w)
                   for w, g in zip(net.weights, grads)]
    for group in net.shared_groups:
        total = sum(grads[l] for l in group)
        rep = net.weights[group[0]]
        shared = rep - cfg.eta * (total + cfg.lam * rep)
        for l in group:
            new_weights[l] = shared.copy()
    return LayeredNetwork(weights=new_weights, activations=list(net.activations),
                          shared_groups=[list(g) for g in net.shared_groups])


def train(net: LayeredNetwork, batch: TrainingBatch, cfg: TrainingConfig,
          stop_loss: Optional[float] = None):
    """Run gradient-descent epochs; returns the trained net and loss history.

    full_batch sums all pattern gradients into one update per epoch;
    stochastic applies one pattern at a time in a freshly shuffled order
    drawn from the seeded generator. history[0] is the initial loss and
    history[k] the loss after epoch k. Training stops early once the loss
    falls below stop_loss.
    """
    rng = np.random.default_rng(cfg.seed)
    history = [loss(net, batch, cfg.lam)]
    for _ in range(cfg.epochs):
        if cfg.batch_mode == "full_batch":
            net = apply_update(net, batch_gradients(net, batch), cfg)
        else:
            for p in rng.permutation(batch.count):
                state = backprop(net, batch.inputs[p], batch.targets[p])
                net = apply_update(net, state.grads, cfg)
        history.append(loss(net, batch, cfg.lam))
        if stop_loss is not None and history[-1] < stop_loss:
            break
    return net, np.asarray(history)


def random_network(widths, activations, seed: int = 0) -> LayeredNetwork:
    """Seeded network with weights uniform in +/- 1/sqrt(fan_in).

    ``activations`` may be names or ActivationFunction instances, one per
    layer (len(widths) - 1 of them).
    """
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    if len(activations) != len(widths) - 1:
        raise ValueError("need one activation per layer")
    acts = [activation_by_name(a) if isinstance(a, str) else a for a in activations]
    rng = np.random.default_rng(seed)
    weights = []
    for l in range(1, len(widths)):
        fan_in = widths[l - 1] + 1
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(widths[l], fan_in)))
    return LayeredNetwork(weights=weights, activations=acts)


def unroll(t, h, g: ActivationFunction, cfg: IntegratorConfig, k: int) -> LayeredNetwork:
    """Express K Euler steps of the analog dynamics as a shared-weight network.

    With dt = tau the self-coupling coefficient vanishes and each layer is
    plainly [T | h] under g, taking v as the state. Otherwise every layer
    carries auxiliary linear units that convey the internal state u forward:
    the state vector is [v; u] and both halves compute the same
    pre-activation (1 - dt/tau) u + (dt/tau)(T v + h), mapped through g on
    the first half and through the identity on the second.
    """
    if k < 1:
        raise ValueError("need at least one layer")
    t = np.asarray(t, dtype=np.float64)
    n = t.shape[0]
    h = np.asarray(h, dtype=np.float64)
    tau = cfg.tau if cfg.tau.shape == (n,) else np.full(n, cfg.tau[0])
    alpha = cfg.dt / tau
    if np.all(alpha == 1.0):
        w = np.hstack([t, h[:, None]])
        weights = [w.copy() for _ in range(k)]
        acts = [g] * k
    else:
        block = np.hstack([alpha[:, None] * t, np.diag(1.0 - alpha),
                           (alpha * h)[:, None]])
        w = np.vstack([block, block])
        weights = [w.copy() for _ in range(k)]
        acts = [mixed_activation([(g, n), (identity_activation(), n)])] * k
    groups = [list(range(k))] if k > 1 else []
    return LayeredNetwork(weights=weights, activations=acts, shared_groups=groups)


def save_network(net: LayeredNetwork, path) -> None:
    """Serialize the network as JSON with explicit shapes and sharing tags."""
    payload = {
        "layers": [
            {
                "rows": int(w.shape[0]),
                "cols": int(w.shape[1]),
                "activation": act.name,
                "weights": [float(x) for x in w.ravel()],
            }
            for w, act in zip(net.weights, net.activations)
        ],
        "shared_groups": [list(map(int, g)) for g in net.shared_groups],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_network(path) -> LayeredNetwork:
    with open(path) as fh:
        payload = json.load(fh)
    weights, acts = [], []
    for layer in payload["layers"]:
        w = np.asarray(layer["weights"], dtype=np.float64).reshape(
            layer["rows"], layer["cols"])
        weights.append(w)
        acts.append(activation_by_name(layer["activation"]))
    return LayeredNetwork(weights=weights, activations=acts,
                          shared_groups=[list(g) for g in payload.get("shared_groups", [])])


def save_training_csv(batch: TrainingBatch, path) -> None:
    """Write a batch as CSV with x* input columns and y* target columns."""
    kx, ky = batch.inputs.shape[1], batch.targets.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(kx)] + [f"y{i}" for i in range(ky)])
        for x, y in zip(batch.inputs, batch.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def load_training_csv(path) -> TrainingBatch:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        kx = sum(1 for name in header if name.startswith("x"))
        ky = len(header) - kx
        if kx == 0 or ky == 0 or not all(name.startswith("y") for name in header[kx:]):
            raise ValueError("header must list x* input columns then y* target columns")
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            values = [float(v) for v in row]
            xs.append(values[:kx])
            ys.append(values[kx:])
    return TrainingBatch(inputs=np.asarray(xs), targets=np.asarray(ys))


def xor_batch() -> TrainingBatch:
    """The classic four-pattern parity task in +/-1 coding."""
    inputs = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
    targets = np.array([[-1.0], [1.0], [1.0], [-1.0]])
    return TrainingBatch(inputs=inputs, targets=targets)
