"""Minimal fully-connected network kernel with manual backpropagation.

Everything is plain numpy: layers hold a weight matrix (fan_in x fan_out),
a bias vector and an activation. Activations are the usual scalar ones plus
a blockwise kind that applies tanh or softmax per output segment, which is
what a tabular generator needs on its final layer.

The gradient-norm penalty used for critic training requires derivatives of
an input gradient with respect to the parameters. For piecewise-linear
activations the activation pattern is locally constant, so those second-
order terms are exact almost everywhere and are computed here with a
forward tangent pass followed by a reverse pass over it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

LEAKY_SLOPE = 0.2
_SCALAR_ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "linear")


@dataclass(frozen=True)
class BlockActivation:
    """Per-segment activation; segments must partition the layer width."""

    segments: tuple[tuple[int, int, str], ...]

    def __post_init__(self):
        pos = 0
        for start, stop, kind in self.segments:
            if start != pos or stop <= start:
                raise ValueError(f"segments must tile the width, got {self.segments}")
            if kind not in ("tanh", "softmax", "linear"):
                raise ValueError(f"unknown segment kind {kind!r}")
            pos = stop

    @property
    def width(self) -> int:
        return self.segments[-1][1]


Activation = Union[str, BlockActivation]


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation


class Mlp:
    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            if layer.weight.shape[1] != layer.bias.shape[0]:
                raise ValueError(f"layer {i}: bias does not match weight")
            if i > 0 and self.layers[i - 1].weight.shape[1] != layer.weight.shape[0]:
                raise ValueError(f"layer {i}: input width does not chain")
            act = layer.activation
            if isinstance(act, BlockActivation):
                if act.width != layer.weight.shape[1]:
                    raise ValueError(f"layer {i}: block segments do not cover width")
            elif act not in _SCALAR_ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {act!r}")

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_width(self) -> int:
        return self.layers[-1].weight.shape[1]

    def param_count(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def copy(self) -> "Mlp":
        return Mlp(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def check_finite(self) -> None:
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite gradient in layer {i}")

    def add(self, other: "Gradients") -> None:
        for i in range(len(self.weights)):
            self.weights[i] += other.weights[i]
            self.biases[i] += other.biases[i]


def init_mlp(dims: Sequence[int], activations: Sequence[Activation], rng) -> Mlp:
    """He-style uniform initialization scaled by fan-in, zero biases."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def _apply_activation(z: np.ndarray, act: Activation) -> np.ndarray:
    if isinstance(act, BlockActivation):
        out = np.empty_like(z)
        for start, stop, kind in act.segments:
            seg = z[:, start:stop]
            if kind == "tanh":
                out[:, start:stop] = np.tanh(seg)
            elif kind == "softmax":
                shifted = seg - seg.max(axis=1, keepdims=True)
                e = np.exp(shifted)
                out[:, start:stop] = e / e.sum(axis=1, keepdims=True)
            else:
                out[:, start:stop] = seg
        return out
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if act == "tanh":
        return np.tanh(z)
    if act == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _activation_backward(a: np.ndarray, grad: np.ndarray, act: Activation) -> np.ndarray:
    """Gradient w.r.t. pre-activation, from the post-activation value."""
    if isinstance(act, BlockActivation):
        out = np.empty_like(grad)
        for start, stop, kind in act.segments:
            g = grad[:, start:stop]
            s = a[:, start:stop]
            if kind == "tanh":
                out[:, start:stop] = g * (1.0 - s * s)
            elif kind == "softmax":
                inner = (g * s).sum(axis=1, keepdims=True)
                out[:, start:stop] = s * (g - inner)
            else:
                out[:, start:stop] = g
        return out
    if act == "relu":
        return grad * (a > 0)
    if act == "leaky_relu":
        return grad * np.where(a > 0, 1.0, LEAKY_SLOPE)
    if act == "tanh":
        return grad * (1.0 - a * a)
    if act == "sigmoid":
        return grad * a * (1.0 - a)
    return grad


def forward(net: Mlp, batch: np.ndarray) -> list[np.ndarray]:
    """All layer activations, input first, output last."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_width:
        raise ValueError(
            f"batch width {x.shape[-1] if x.ndim == 2 else x.shape} "
            f"does not match input width {net.input_width}"
        )
    acts = [x]
    for layer in net.layers:
        z = acts[-1] @ layer.weight + layer.bias
        acts.append(_apply_activation(z, layer.activation))
    return acts


def backward(
    net: Mlp,
    acts: list[np.ndarray],
    output_grad: Optional[np.ndarray] = None,
    inject: Optional[dict[int, np.ndarray]] = None,
) -> tuple[Gradients, np.ndarray]:
    """Exact reverse-mode gradients of the forward map.

    ``output_grad`` is the loss gradient at the final activation (defaults
    to zeros); ``inject`` may add loss gradients at intermediate
    activations, keyed by activation index (0 is the input). Returns the
    parameter gradients and the gradient w.r.t. the input batch.
    """
    n_layers = len(net.layers)
    if len(acts) != n_layers + 1:
        raise ValueError("activation list does not match network depth")
    inject = inject or {}
    r = np.zeros_like(acts[-1]) if output_grad is None else np.asarray(
        output_grad, dtype=np.float64
    )
    if r.shape != acts[-1].shape:
        raise ValueError("output_grad shape does not match the output")
    r = r.copy()
    if n_layers in inject:
        r += inject[n_layers]
    grads = Gradients([None] * n_layers, [None] * n_layers)
    for l in range(n_layers - 1, -1, -1):
        layer = net.layers[l]
        dz = _activation_backward(acts[l + 1], r, layer.activation)
        grads.weights[l] = acts[l].T @ dz
        grads.biases[l] = dz.sum(axis=0)
        r = dz @ layer.weight.T
        if l in inject:
            r = r + inject[l]
    return grads, r


def zero_gradients(net: Mlp) -> Gradients:
    return Gradients(
        [np.zeros_like(l.weight) for l in net.layers],
        [np.zeros_like(l.bias) for l in net.layers],
    )


# ---------------------------------------------------------------------------
# gradient-norm penalty (piecewise-linear networks)


def _linear_masks(net: Mlp, acts: list[np.ndarray]) -> list[np.ndarray]:
    masks = []
    for layer, a in zip(net.layers, acts[1:]):
        if layer.activation == "linear":
            masks.append(np.ones_like(a))
        elif layer.activation == "relu":
            masks.append((a > 0).astype(np.float64))
        elif layer.activation == "leaky_relu":
            masks.append(np.where(a > 0, 1.0, LEAKY_SLOPE))
        else:
            raise ValueError(
                "gradient penalty requires piecewise-linear activations, "
                f"got {layer.activation!r}"
            )
    return masks


def input_gradient(net: Mlp, batch: np.ndarray) -> np.ndarray:
    """Per-sample gradient of the summed outputs w.r.t. the input."""
    acts = forward(net, batch)
    _, g = backward(net, acts, np.ones_like(acts[-1]))
    return g


def gradient_penalty(net: Mlp, batch: np.ndarray, weight: float) -> tuple[float, Gradients]:
    """Penalty weight * mean((||grad_x net(x)|| - 1)^2) and its parameter grads.

    Bias gradients are zero: shifting a bias only moves the (measure-zero)
    kink set, not the local input gradient.
    """
    acts = forward(net, batch)
    masks = _linear_masks(net, acts)
    n = batch.shape[0]

    g = np.ones_like(acts[-1])
    for l in range(len(net.layers) - 1, -1, -1):
        g = (g * masks[l]) @ net.layers[l].weight.T
    norms = np.sqrt((g * g).sum(axis=1))
    penalty = weight * float(np.mean((norms - 1.0) ** 2))

    safe = np.maximum(norms, 1e-12)
    u = (2.0 * weight * (norms - 1.0) / (n * safe))[:, None] * g

    tangents = [u]
    for l, layer in enumerate(net.layers):
        tangents.append((tangents[-1] @ layer.weight) * masks[l])

    grads = zero_gradients(net)
    r = np.ones_like(acts[-1])
    for l in range(len(net.layers) - 1, -1, -1):
        zbar = r * masks[l]
        grads.weights[l] = tangents[l].T @ zbar
        r = zbar @ net.layers[l].weight.T
    return penalty, grads


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8
    step: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 2e-4, beta1: float = 0.5,
                beta2: float = 0.9, eps: float = 1e-8) -> "AdamState":
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m_weights=[np.zeros_like(l.weight) for l in net.layers],
            v_weights=[np.zeros_like(l.weight) for l in net.layers],
            m_biases=[np.zeros_like(l.bias) for l in net.layers],
            v_biases=[np.zeros_like(l.bias) for l in net.layers],
        )


def adam_step(state: AdamState, net: Mlp, grads: Gradients) -> None:
    """One in-place Adam update with bias correction."""
    grads.check_finite()
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for l, layer in enumerate(net.layers):
        for param, g, m, v in (
            (layer.weight, grads.weights[l], state.m_weights[l], state.v_weights[l]),
            (layer.bias, grads.biases[l], state.m_biases[l], state.v_biases[l]),
        ):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            param -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# finite-difference harnesses

LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def grad_check(net: Mlp, batch: np.ndarray, loss: LossFn, eps: float = 1e-5,
               rng=None, max_checks: int = 200) -> float:
    """Max relative deviation between backprop and central differences.

    ``loss`` maps the network output to (scalar, gradient w.r.t. output).
    At most ``max_checks`` parameter coordinates are sampled.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    acts = forward(net, batch)
    _, output_grad = loss(acts[-1])
    analytic, _ = backward(net, acts, output_grad)
    return _fd_deviation(
        net,
        lambda: loss(forward(net, batch)[-1])[0],
        analytic,
        eps,
        rng,
        max_checks,
    )


def grad_check_params(net: Mlp, scalar_fn: Callable[[], float],
                      analytic: Gradients, eps: float = 1e-5, rng=None,
                      max_checks: int = 200) -> float:
    """Like :func:`grad_check` for scalars that are not output functionals
    (e.g. the gradient-norm penalty)."""
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    return _fd_deviation(net, scalar_fn, analytic, eps, rng, max_checks)


def _fd_deviation(net, scalar_fn, analytic: Gradients, eps, rng, max_checks) -> float:
    coords = []
    for l, layer in enumerate(net.layers):
        for j in range(layer.weight.size):
            coords.append((l, "w", j))
        for j in range(layer.bias.size):
            coords.append((l, "b", j))
    if len(coords) > max_checks:
        rng = np.random.default_rng(0) if rng is None else rng
        picked = rng.choice(len(coords), size=max_checks, replace=False)
        coords = [coords[i] for i in picked]
    worst = 0.0
    for l, which, j in coords:
        layer = net.layers[l]
        param = layer.weight if which == "w" else layer.bias
        flat = param.reshape(-1)
        orig = flat[j]
        flat[j] = orig + eps
        up = scalar_fn()
        flat[j] = orig - eps
        down = scalar_fn()
        flat[j] = orig
        fd = (up - down) / (2.0 * eps)
        a = (analytic.weights[l] if which == "w" else analytic.biases[l]).reshape(-1)[j]
        dev = abs(a - fd) / max(abs(a), abs(fd), 1e-2)
        worst = max(worst, dev)
    return worst
